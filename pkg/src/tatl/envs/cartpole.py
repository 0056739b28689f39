import math

import numpy as np

from ..mdp import ActionSet
from .base import Environment


class CartPole(Environment):
    """Cart-pole balancing with push forces {-20, 0, +20} N.

    State ``(x, x_dot, theta, theta_dot)``; ``theta > 0`` leans toward +x.
    Classic equations of motion (uniform pole of half-length ``l``)
    integrated with semi-implicit Euler.  The episode fails when the pole
    leaves +-12 degrees or the cart leaves +-2.4 m.

    Reward is ``1 - (theta / theta_max)^2`` per surviving step and
    ``failure_reward`` on the failing step.
    """

    name = "cart_pole"
    actuated_dim = 1

    def __init__(self, force=20.0, cart_mass=1.0, pole_mass=0.1, half_length=0.5,
                 gravity=9.8, dt=0.02, theta_limit=math.radians(12.0), x_limit=2.4,
                 horizon=500, discount=0.98, failure_reward=-100.0, start_spread=0.05):
        self.force = float(force)
        self.theta_limit = float(theta_limit)
        self.x_limit = float(x_limit)
        super().__init__(
            ActionSet([-self.force, 0.0, self.force]),
            # velocity bounds are nominal (not reachable before the pole falls)
            state_low=[-x_limit, -10.0, -math.pi / 2, -10.0],
            state_high=[x_limit, 10.0, math.pi / 2, 10.0],
            horizon=horizon,
            discount=discount,
            reward_bound=max(1.0, abs(failure_reward)),
        )
        self.cart_mass = float(cart_mass)
        self.pole_mass = float(pole_mass)
        self.half_length = float(half_length)
        self.gravity = float(gravity)
        self.dt = float(dt)
        self.failure_reward = float(failure_reward)
        self.start_spread = float(start_spread)

    def initial_state(self, rng):
        return rng.uniform(-self.start_spread, self.start_spread, size=4)

    def accelerations(self, state, force):
        _, _, th, th_dot = (float(v) for v in state)
        total = self.cart_mass + self.pole_mass
        ml = self.pole_mass * self.half_length
        sin, cos = math.sin(th), math.cos(th)
        temp = (force + ml * th_dot * th_dot * sin) / total
        th_acc = (self.gravity * sin - cos * temp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total))
        x_acc = temp - ml * th_acc * cos / total
        return x_acc, th_acc

    def energy(self, state):
        """Mechanical energy (kinetic + potential, pivot height reference)."""
        _, x_dot, th, th_dot = (float(v) for v in state)
        m, l = self.pole_mass, self.half_length
        kinetic = (0.5 * (self.cart_mass + m) * x_dot ** 2
                   + m * l * x_dot * th_dot * math.cos(th)
                   + 0.5 * (4.0 / 3.0) * m * l * l * th_dot ** 2)
        return kinetic + m * self.gravity * l * math.cos(th)

    def _dynamics(self, state, action_value, noise):
        x, x_dot, th, th_dot = (float(v) for v in state)
        x_acc, th_acc = self.accelerations(state, float(action_value[0]))
        x_dot += self.dt * x_acc
        x += self.dt * x_dot
        th_dot += self.dt * th_acc
        th += self.dt * th_dot
        nxt = np.array([x, x_dot, th, th_dot])
        return np.clip(nxt, self.state_low, self.state_high)

    def is_terminal(self, next_state):
        return abs(next_state[2]) > self.theta_limit or abs(next_state[0]) >= self.x_limit

    def reward(self, state, action_value, next_state, terminal):
        if terminal:
            return self.failure_reward
        return 1.0 - (float(next_state[2]) / self.theta_limit) ** 2
