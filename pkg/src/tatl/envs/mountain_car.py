import math

import numpy as np

from ..mdp import ActionSet
from .base import Environment


class MountainCar(Environment):
    """Under-powered car in a valley; throttle in {-1, 0, +1}.

    Standard update ``v' = v + 0.001 a - 0.0025 cos(3x)``, ``x' = x + v'``,
    with the velocity clipped to +-0.07.  Both walls are inelastic: reaching
    a position bound clamps ``x`` and zeroes ``v``.  Reward is the negative
    squared distance of ``x`` to the goal; ``x >= goal`` is terminal.
    """

    name = "mountain_car"
    actuated_dim = 1

    def __init__(self, goal_position=0.6, horizon=300, discount=0.98):
        super().__init__(
            ActionSet([-1.0, 0.0, 1.0]),
            state_low=[-1.2, -0.07],
            state_high=[0.6, 0.07],
            horizon=horizon,
            discount=discount,
            reward_bound=(0.6 + 1.2) ** 2,
        )
        self.goal_position = float(goal_position)

    def initial_state(self, rng):
        return np.array([rng.uniform(-0.6, -0.4), 0.0])

    def _dynamics(self, state, action_value, noise):
        x, v = float(state[0]), float(state[1])
        v = v + 0.001 * float(action_value[0]) - 0.0025 * math.cos(3.0 * x)
        v = min(max(v, -0.07), 0.07)
        x = x + v
        if x <= -1.2:
            x, v = -1.2, 0.0
        elif x >= 0.6:
            x, v = 0.6, 0.0
        return np.array([x, v])

    def is_terminal(self, next_state):
        return next_state[0] >= self.goal_position

    def reward(self, state, action_value, next_state, terminal):
        return -(float(next_state[0]) - self.goal_position) ** 2
