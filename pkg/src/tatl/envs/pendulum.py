import math

import numpy as np

from ..mdp import ActionSet
from .base import Environment


class InvertedPendulum(Environment):
    """Torque-limited pendulum swing-up and balance.

    State is ``(theta, theta_dot)`` with ``theta = 0`` upright and
    ``theta = +-pi`` hanging.  Dynamics, integrated with semi-implicit Euler::

        theta_ddot = (g / L) sin(theta) + sign * u / (M L^2) - b theta_dot

    With ``time_varying`` the length and mass follow
    ``L_i = L0 + 0.5 cos(pi i / 50)`` (same for ``M_i``), evaluated at the
    current step index before integrating.  ``control_sign=-1`` flips the
    effect of the actuator (negative-transfer target).

    The default torque limit (7 N m) is below ``M0 g L0``, so the
    pendulum cannot be lifted straight up from hanging and has to be swung;
    with the angular rate capped at pi rad/s it is also close to the smallest
    limit for which swing-up is possible at all.
    """

    name = "pendulum"
    angle_dims = (0,)
    actuated_dim = 1

    def __init__(self, torque_limit=7.0, time_varying=False, control_sign=1.0,
                 length=1.0, mass=1.0, gravity=9.81, damping=0.1, dt=0.02,
                 horizon=500, discount=0.98, start_jitter=0.1):
        self.torque_limit = float(torque_limit)
        super().__init__(
            ActionSet([-self.torque_limit, 0.0, self.torque_limit]),
            state_low=[-math.pi, -math.pi],
            state_high=[math.pi, math.pi],
            horizon=horizon,
            discount=discount,
            reward_bound=15.0 * math.pi ** 2,
        )
        self.time_varying = bool(time_varying)
        self.control_sign = float(control_sign)
        self.length_0 = float(length)
        self.mass_0 = float(mass)
        self.gravity = float(gravity)
        self.damping = float(damping)
        self.dt = float(dt)
        self.start_jitter = float(start_jitter)

    def parameters(self, step_index=None):
        """Length and mass in effect at ``step_index`` (defaults to now)."""
        i = self.t if step_index is None else step_index
        if not self.time_varying:
            return self.length_0, self.mass_0
        c = 0.5 * math.cos(math.pi * i / 50.0)
        return self.length_0 + c, self.mass_0 + c

    def initial_state(self, rng):
        return np.array([-math.pi, rng.uniform(-self.start_jitter, self.start_jitter)])

    def _dynamics(self, state, action_value, noise):
        theta, omega = float(state[0]), float(state[1])
        L, M = self.parameters()
        u = self.control_sign * float(action_value[0])
        acc = (self.gravity / L) * math.sin(theta) + u / (M * L * L) - self.damping * omega
        omega = min(max(omega + self.dt * acc, -math.pi), math.pi)
        theta = (theta + self.dt * omega + math.pi) % (2.0 * math.pi) - math.pi
        return np.array([theta, omega])

    def reward(self, state, action_value, next_state, terminal):
        return reward_quadratic(next_state)


def reward_quadratic(state):
    """``-10 theta^2 - 5 theta_dot^2``: zero upright, most negative hanging."""
    return -10.0 * float(state[0]) ** 2 - 5.0 * float(state[1]) ** 2
