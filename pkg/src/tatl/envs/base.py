from __future__ import annotations

import copy

import numpy as np

from .. import rng as _rng
from ..mdp import MdpSpec


def wrap_angle(x):
    """Wrap an angle (scalar or array) to [-pi, pi)."""
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


class Environment:
    """Single-owner, stateful simulator.

    Subclasses provide ``_dynamics(state, action_value, noise)``, the pure
    transition used both by :meth:`step` and by :meth:`simulate`, plus
    ``reward`` and ``is_terminal``.  ``action_value`` is always a 1-D array.
    """

    name = "env"
    angle_dims: tuple = ()
    # index of the state row the control enters directly (velocity row)
    actuated_dim: int | None = None
    continuous_actuation = True

    def __init__(self, action_set, state_low, state_high, horizon, discount, reward_bound):
        self.action_set = action_set
        self.state_low = np.asarray(state_low, dtype=float)
        self.state_high = np.asarray(state_high, dtype=float)
        self.horizon = int(horizon)
        self.discount = float(discount)
        self.reward_bound = float(reward_bound)
        self.state = None
        self.t = 0
        self._noise_rng = _rng.stream(0, self.name, "noise")

    @property
    def state_dim(self):
        return len(self.state_low)

    @property
    def spec(self):
        return MdpSpec(
            state_dim=self.state_dim,
            action_set=self.action_set,
            horizon=self.horizon,
            discount=self.discount,
            initial_distribution=self.initial_state,
            reward_bound=self.reward_bound,
            state_low=self.state_low,
            state_high=self.state_high,
        )

    # -- to override -------------------------------------------------------
    def initial_state(self, rng):
        raise NotImplementedError

    def _dynamics(self, state, action_value, noise):
        raise NotImplementedError

    def _draw_noise(self):
        return None

    def reward(self, state, action_value, next_state, terminal):
        raise NotImplementedError

    def is_terminal(self, next_state):
        return False

    # -- public API --------------------------------------------------------
    def reset(self, seed=None, state=None):
        seed = 0 if seed is None else seed
        self._noise_rng = _rng.stream(seed, self.name, "noise")
        self.t = 0
        if state is None:
            state = self.initial_state(_rng.stream(seed, "initial-state"))
        self.state = np.array(state, dtype=float)
        return self.state.copy()

    def step(self, action_index):
        """Apply discrete action ``action_index``; returns ``(s', r, terminal)``."""
        return self._advance(self.action_set.value(action_index))

    def step_value(self, action_value):
        """Apply an arbitrary action magnitude (continuous-actuation tasks)."""
        if not self.continuous_actuation:
            raise TypeError(f"{self.name} only accepts discrete actions")
        return self._advance(np.atleast_1d(np.asarray(action_value, dtype=float)))

    def _advance(self, value):
        s = self.state
        nxt = self._dynamics(s, value, self._draw_noise())
        self.t += 1
        terminal = bool(self.is_terminal(nxt))
        r = float(self.reward(s, value, nxt, terminal))
        self.state = nxt
        return nxt.copy(), r, terminal

    def simulate(self, state, action_value):
        """Noise-free successor of ``state`` at the current time; no mutation."""
        return self._dynamics(np.asarray(state, dtype=float), np.atleast_1d(np.asarray(action_value, dtype=float)), None)

    def state_difference(self, a, b):
        """``a - b`` with angular components wrapped."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self.angle_dims:
            d = d.copy()
            idx = list(self.angle_dims)
            d[..., idx] = wrap_angle(d[..., idx])
        return d

    def copy(self):
        return copy.deepcopy(self)

    def __repr__(self):
        return f"{type(self).__name__}()"
