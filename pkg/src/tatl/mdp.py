"""MDP building blocks shared by every other module.

States are 1-D float arrays.  Actions are referred to by index into an
:class:`ActionSet`; the set holds the physical magnitude of each action
(force, torque, or a grid displacement vector).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import NumericalFault
from . import rng as _rng

__all__ = [
    "ActionSet",
    "MdpSpec",
    "Transition",
    "Trajectory",
    "Policy",
    "ConstantPolicy",
    "RandomPolicy",
    "FunctionPolicy",
    "rollout",
    "discounted_return",
    "average_reward",
    "sample_initial_state",
    "trajectories_to_csv",
    "trajectories_from_csv",
]


class ActionSet:
    """Ordered, finite set of action magnitudes.

    Scalar action sets are kept sorted ascending so that equal-cardinality
    sets correspond index by index (-20 N <-> -2 N m, and so on).  Vector
    valued sets (grid displacements) keep the order they were given in.
    """

    def __init__(self, values):
        vals = np.array(values, dtype=float)
        if vals.ndim == 1:
            vals = np.sort(vals)
        elif vals.ndim != 2:
            raise ValueError("action values must be a list of scalars or of vectors")
        if len(vals) == 0:
            raise ValueError("action set is empty")
        rows = [tuple(np.atleast_1d(v)) for v in vals]
        if len(set(rows)) != len(rows):
            raise ValueError(f"action values are not distinct: {values!r}")
        vals.setflags(write=False)
        self.values = vals
        self._rows = []
        for v in vals:
            row = np.atleast_1d(v).astype(float)
            row.setflags(write=False)
            self._rows.append(row)

    @property
    def cardinality(self):
        return len(self.values)

    def __len__(self):
        return len(self.values)

    @property
    def action_dim(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    @property
    def max_magnitude(self):
        return float(np.max(np.abs(self.values)))

    def value(self, index):
        """Magnitude of action ``index`` as a read-only 1-D array of length ``action_dim``."""
        return self._rows[index]

    def __eq__(self, other):
        return isinstance(other, ActionSet) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"ActionSet({self.values.tolist()!r})"


@dataclass(frozen=True)
class MdpSpec:
    state_dim: int
    action_set: ActionSet
    horizon: int
    discount: float
    initial_distribution: Callable[[np.random.Generator], np.ndarray]
    reward_bound: float
    state_low: Optional[np.ndarray] = None
    state_high: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.state_dim < 1:
            raise ValueError("state_dim must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        if self.reward_bound <= 0:
            raise ValueError("reward_bound must be positive")


class Transition(NamedTuple):
    state: np.ndarray
    action_index: int
    next_state: np.ndarray
    reward: float
    terminal: bool
    # magnitude actually applied, when it differs from the indexed action
    action_value: Optional[np.ndarray] = None


@dataclass
class Trajectory:
    transitions: list = field(default_factory=list)
    seed: Optional[int] = None

    def __len__(self):
        return len(self.transitions)

    @property
    def rewards(self):
        return np.array([t.reward for t in self.transitions], dtype=float)

    @property
    def total_reward(self):
        return float(sum(t.reward for t in self.transitions))

    @property
    def states(self):
        """States visited, including the final next state."""
        if not self.transitions:
            return np.empty((0, 0))
        rows = [t.state for t in self.transitions] + [self.transitions[-1].next_state]
        return np.array(rows)

    @property
    def actions(self):
        return np.array([t.action_index for t in self.transitions], dtype=int)

    @property
    def terminated(self):
        return bool(self.transitions) and bool(self.transitions[-1].terminal)

    def is_chained(self):
        return all(
            np.array_equal(a.next_state, b.state)
            for a, b in zip(self.transitions, self.transitions[1:])
        )


class Policy:
    """Maps a state to an action index.

    Stochastic policies draw from a generator installed by :meth:`reset`, so a
    rollout seeds its policy along with its environment.
    """

    def reset(self, seed):
        pass

    def __call__(self, state):
        raise NotImplementedError


class ConstantPolicy(Policy):
    def __init__(self, action_index):
        self.action_index = int(action_index)

    def __call__(self, state):
        return self.action_index


class RandomPolicy(Policy):
    """Uniformly random action indices."""

    def __init__(self, n_actions, seed=0):
        self.n_actions = int(n_actions)
        self.reset(seed)

    def reset(self, seed):
        self._rng = _rng.stream(seed, "random-policy")

    def __call__(self, state):
        return int(self._rng.integers(self.n_actions))


class FunctionPolicy(Policy):
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, state):
        return int(self.fn(state))


def rollout(env, policy, max_steps, seed, initial_state=None):
    """Run ``policy`` in ``env`` for at most ``max_steps`` steps.

    The environment is reset from ``seed`` (or placed at ``initial_state``)
    and the policy is reseeded from the same seed, so the result is a pure
    function of ``(env parameters, policy, seed)``.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    state = env.reset(seed=seed, state=initial_state)
    policy.reset(seed)
    traj = Trajectory(seed=seed)
    for step in range(max_steps):
        a = policy(state)
        next_state, reward, terminal = env.step(a)
        if not (np.all(np.isfinite(next_state)) and math.isfinite(reward)):
            raise NumericalFault("environment produced a non-finite state", step=step)
        traj.transitions.append(Transition(state, int(a), next_state, float(reward), bool(terminal)))
        state = next_state
        if terminal:
            break
    return traj


def discounted_return(traj, discount):
    """Sum of ``discount**i * r_i`` over the trajectory, ``i`` counted from 0."""
    if not 0.0 <= discount < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {discount}")
    total = 0.0
    for r in reversed(traj.rewards):
        total = r + discount * total
    return float(total)


def average_reward(trajs):
    """Mean undiscounted return over a non-empty list of trajectories."""
    if len(trajs) == 0:
        raise ValueError("average_reward needs at least one trajectory")
    return float(np.mean([t.total_reward for t in trajs]))


def sample_initial_state(spec, seed):
    """Draw an initial state from ``spec.initial_distribution``, reproducibly."""
    return np.asarray(spec.initial_distribution(_rng.stream(seed, "initial-state")), dtype=float)


def trajectories_to_csv(trajs, fh=None):
    """Write trajectories as CSV, one row per transition.

    A row with ``action_index == -1`` closes each trajectory and carries its
    final state.  Returns the text when ``fh`` is None.
    """
    trajs = list(trajs)
    dim = len(trajs[0].transitions[0].state) if trajs and trajs[0].transitions else 0
    out = fh if fh is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["step"] + [f"s_{i}" for i in range(dim)] + ["action_index", "reward", "terminal"])
    for traj in trajs:
        for i, t in enumerate(traj.transitions):
            w.writerow([i] + [repr(float(x)) for x in t.state] + [t.action_index, repr(float(t.reward)), int(t.terminal)])
        if traj.transitions:
            last = traj.transitions[-1]
            w.writerow([len(traj.transitions)] + [repr(float(x)) for x in last.next_state] + [-1, repr(0.0), int(last.terminal)])
    if fh is None:
        return out.getvalue()
    return None


def trajectories_from_csv(text):
    """Inverse of :func:`trajectories_to_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    header, rows = rows[0], rows[1:]
    dim = len(header) - 4
    trajs, pending = [], []
    for row in rows:
        state = np.array([float(x) for x in row[1:1 + dim]])
        a, r, term = int(row[1 + dim]), float(row[2 + dim]), bool(int(row[3 + dim]))
        if a >= 0:
            pending.append([state, a, r, term])
            continue
        traj = Trajectory()
        for k, (s, ai, ri, ti) in enumerate(pending):
            nxt = pending[k + 1][0] if k + 1 < len(pending) else state
            traj.transitions.append(Transition(s, ai, nxt, ri, ti))
        trajs.append(traj)
        pending = []
    return trajs
