"""Grid navigation with obstacles and an optional wind field.

Layouts are plain text, one line per grid row with the top row first.
Cells are whitespace separated tokens:

    .        free cell
    #        obstacle
    G        goal
    w<dx><dy> free cell with wind, e.g. ``w+0+1`` pushes one cell up

Coordinates are ``(x, y)`` with ``x`` to the right and ``y`` up.
"""

import re
from importlib import resources

import numpy as np

from ..mdp import ActionSet
from .base import Environment

_WIND = re.compile(r"^w([+-]?\d+)([+-]?\d+)$")

# up, down, right, left
MOVES = ((0, 1), (0, -1), (1, 0), (-1, 0))


def parse_layout(text):
    """Return ``(width, height, obstacles, goal, wind)`` from layout text.

    ``wind`` maps cell -> (dx, dy) for windy cells only.
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith(";")]
    if not rows:
        raise ValueError("empty grid layout")
    height, width = len(rows), len(rows[0])
    obstacles, wind, goal = set(), {}, None
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"row {r} has {len(row)} cells, expected {width}")
        y = height - 1 - r
        for x, tok in enumerate(row):
            if tok == ".":
                continue
            if tok == "#":
                obstacles.add((x, y))
            elif tok == "G":
                if goal is not None:
                    raise ValueError("layout has more than one goal")
                goal = (x, y)
            else:
                m = _WIND.match(tok)
                if m is None:
                    raise ValueError(f"unknown cell token {tok!r} at row {r}, column {x}")
                wind[(x, y)] = (int(m.group(1)), int(m.group(2)))
    if goal is None:
        raise ValueError("layout has no goal")
    return width, height, obstacles, goal, wind


def default_layout_text():
    return resources.files("tatl.envs.data").joinpath("grid_world.txt").read_text(encoding="utf-8")


class GridWorld(Environment):
    """Deterministic grid world.

    A move into an obstacle leaves the agent in place and costs -1.  Moves
    off the grid are clamped at the border.  In windy mode the wind of the
    cell the agent started from is added after the move; wind that would
    carry the agent into an obstacle is blocked.  Entering the goal pays
    +10 and ends the episode.
    """

    name = "grid_world"
    continuous_actuation = False

    def __init__(self, width, height, obstacles, goal, wind=None, windy=False,
                 horizon=100, discount=0.95):
        super().__init__(
            ActionSet(MOVES),
            state_low=[0, 0],
            state_high=[width - 1, height - 1],
            horizon=horizon,
            discount=discount,
            reward_bound=10.0,
        )
        self.width, self.height = int(width), int(height)
        self.obstacles = frozenset(tuple(c) for c in obstacles)
        self.goal = tuple(goal)
        if self.goal in self.obstacles:
            raise ValueError("goal cell is an obstacle")
        self.wind_field = dict(wind or {})
        self.windy = bool(windy)
        self.free_cells = [(x, y) for y in range(self.height) for x in range(self.width)
                           if (x, y) not in self.obstacles and (x, y) != self.goal]
        self.cell_index = {c: i for i, c in enumerate(self.free_cells)}

    @classmethod
    def from_text(cls, text, windy=False, **kw):
        width, height, obstacles, goal, wind = parse_layout(text)
        return cls(width, height, obstacles, goal, wind=wind, windy=windy, **kw)

    @classmethod
    def default(cls, windy=False, **kw):
        return cls.from_text(default_layout_text(), windy=windy, **kw)

    def without_wind(self):
        return GridWorld(self.width, self.height, self.obstacles, self.goal,
                         wind=self.wind_field, windy=False, horizon=self.horizon, discount=self.discount)

    def initial_state(self, rng):
        return np.array(self.free_cells[int(rng.integers(len(self.free_cells)))], dtype=float)

    def _clamp(self, x, y):
        return min(max(x, 0), self.width - 1), min(max(y, 0), self.height - 1)

    def wind_at(self, cell):
        if not self.windy:
            return (0, 0)
        return self.wind_field.get(tuple(cell), (0, 0))

    def grid_step(self, cell, move):
        """Pure transition on integer cells: returns ``(next_cell, reward, terminal)``."""
        x, y = cell
        dx, dy = int(round(move[0])), int(round(move[1]))
        target = self._clamp(x + dx, y + dy)
        if target in self.obstacles:
            return (x, y), -1.0, False
        if target == self.goal:
            return target, 10.0, True
        wx, wy = self.wind_at((x, y))
        if wx or wy:
            blown = self._clamp(target[0] + wx, target[1] + wy)
            if blown not in self.obstacles:
                target = blown
        if target == self.goal:
            return target, 10.0, True
        return target, 0.0, False

    def _dynamics(self, state, action_value, noise):
        cell = (int(round(state[0])), int(round(state[1])))
        nxt, _, _ = self.grid_step(cell, action_value)
        return np.array(nxt, dtype=float)

    def _advance(self, value):
        cell = (int(round(self.state[0])), int(round(self.state[1])))
        nxt, r, terminal = self.grid_step(cell, value)
        self.t += 1
        self.state = np.array(nxt, dtype=float)
        return self.state.copy(), r, terminal

    def is_terminal(self, next_state):
        return (int(round(next_state[0])), int(round(next_state[1]))) == self.goal

    def reward(self, state, action_value, next_state, terminal):
        cell = (int(round(state[0])), int(round(state[1])))
        return self.grid_step(cell, action_value)[1]

    def render(self, path=()):
        """ASCII picture of the layout, top row first; ``path`` cells drawn as ``*``."""
        path = {tuple(int(v) for v in p) for p in path}
        lines = []
        for y in range(self.height - 1, -1, -1):
            row = []
            for x in range(self.width):
                c = (x, y)
                if c in self.obstacles:
                    row.append("#")
                elif c == self.goal:
                    row.append("G")
                elif c in path:
                    row.append("*")
                elif self.windy and c in self.wind_field:
                    row.append("~")
                else:
                    row.append(".")
            lines.append("".join(row))
        return "\n".join(lines)
