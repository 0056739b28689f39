"""Synthetic datasets and models shared by tests."""

import numpy as np


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def whitened_skewed_cloud(n=800, seed=0):
    """2-D sample with identity covariance and positive skew on both axes.

    Isotropic covariance keeps per-axis z-scaling from distorting a rotated
    copy, so the two clouds share local geometry exactly.
    """
    g = np.random.default_rng(seed)
    x = np.column_stack([g.gamma(2.0, 1.0, n), g.gamma(5.0, 1.0, n)])
    x = x - x.mean(0)
    chol = np.linalg.cholesky(np.cov(x, rowvar=False))
    return x @ np.linalg.inv(chol).T


from tatl.envs.base import Environment  # noqa: E402
from tatl.mdp import ActionSet  # noqa: E402

TRUE_W = np.array([[0.9, 0.1], [-0.2, 0.95]])
TRUE_B = np.array([0.0, 0.5])


class LinearSystem(Environment):
    """``s' = W s + B a (+ noise)``: a target whose apprentice is exactly identifiable."""

    name = "linear_system"
    actuated_dim = 1

    def __init__(self, W=TRUE_W, B=TRUE_B, noise=0.0, horizon=100):
        super().__init__(ActionSet([-1.0, 0.0, 1.0]), [-50.0, -50.0], [50.0, 50.0], horizon, 0.95, 1e4)
        self.W, self.B, self.noise = np.asarray(W, float), np.asarray(B, float), float(noise)

    def initial_state(self, rng):
        return rng.uniform(-1.0, 1.0, size=2)

    def _draw_noise(self):
        return self._noise_rng.normal(0.0, self.noise, size=2) if self.noise else None

    def _dynamics(self, state, action_value, noise):
        nxt = self.W @ state + self.B * float(action_value[0])
        return nxt if noise is None else nxt + noise

    def reward(self, state, action_value, next_state, terminal):
        return -float(next_state @ next_state)
