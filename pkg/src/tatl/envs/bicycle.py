import math

import numpy as np

from ..mdp import ActionSet
from .base import Environment


class Bicycle(Environment):
    """Bicycle balancing after Randlov and Alstrom (1998).

    State ``(theta, theta_dot, omega, omega_dot)``: handlebar angle and rate,
    roll angle from vertical and roll rate.  The agent applies a handlebar
    torque in {-2, 0, +2} N m at a constant forward speed of 2.778 m/s, which
    is below the self-stabilising speed.  Each step the rider's centre of
    mass is displaced sideways by uniform noise in +-``cg_noise`` metres.

    Reward is +1 per upright step and ``fall_reward`` when the roll angle
    exceeds ``fall_angle``.  Episodes also end after ``max_time`` seconds.
    """

    name = "bicycle"
    actuated_dim = 1

    # Randlov & Alstrom constants (SI units)
    c = 0.66
    d_cm = 0.30
    h = 0.94
    wheelbase = 1.11
    mass_cycle = 15.0
    mass_tyre = 1.7
    mass_person = 60.0
    radius = 0.34
    gravity = 9.82
    handlebar_limit = 80.0 * math.pi / 180.0

    def __init__(self, speed=2.778, torque=2.0, cg_noise=0.02, dt=0.01, max_time=1000.0,
                 fall_angle=math.pi / 15.0, fall_reward=-100.0, discount=0.98,
                 rate_limit=20.0, start_spread=0.0):
        self.speed = float(speed)
        self.cg_noise = float(cg_noise)
        self.dt = float(dt)
        self.max_time = float(max_time)
        self.fall_angle = float(fall_angle)
        self.fall_reward = float(fall_reward)
        self.start_spread = float(start_spread)
        lim = self.handlebar_limit
        super().__init__(
            ActionSet([-torque, 0.0, torque]),
            state_low=[-lim, -rate_limit, -math.pi / 2, -rate_limit],
            state_high=[lim, rate_limit, math.pi / 2, rate_limit],
            horizon=int(round(self.max_time / self.dt)),
            discount=discount,
            reward_bound=max(1.0, abs(fall_reward)),
        )
        m = self.mass_cycle + self.mass_person
        self._total_mass = m
        self._inertia_bike = (13.0 / 3.0) * self.mass_cycle * self.h ** 2 + self.mass_person * (self.h + self.d_cm) ** 2
        self._inertia_dc = self.mass_tyre * self.radius ** 2
        self._inertia_dv = 1.5 * self.mass_tyre * self.radius ** 2
        self._inertia_dl = 0.5 * self.mass_tyre * self.radius ** 2
        self._sigma_dot = self.speed / self.radius

    def initial_state(self, rng):
        if self.start_spread == 0.0:
            return np.zeros(4)
        return np.array([0.0, 0.0, rng.uniform(-self.start_spread, self.start_spread), 0.0])

    def _draw_noise(self):
        if self.cg_noise == 0.0:
            return 0.0
        return float(self._noise_rng.uniform(-self.cg_noise, self.cg_noise))

    def _dynamics(self, state, action_value, noise):
        theta, theta_dot, omega, omega_dot = (float(v) for v in state)
        torque = float(action_value[0])
        d = 0.0 if noise is None else noise
        v, l = self.speed, self.wheelbase

        phi = omega + math.atan(d / self.h)
        if theta == 0.0:
            inv_rf = inv_rb = inv_rcm = 0.0
        else:
            inv_rf = abs(math.sin(theta)) / l
            inv_rb = abs(math.tan(theta)) / l
            inv_rcm = 1.0 / math.sqrt((l - self.c) ** 2 + (l / math.tan(theta)) ** 2)
        sign = math.copysign(1.0, theta) if theta != 0.0 else 0.0

        omega_ddot = (self._total_mass * self.h * self.gravity * math.sin(phi)
                      - math.cos(phi) * (self._inertia_dc * self._sigma_dot * theta_dot
                                         + sign * v * v * (self.mass_tyre * self.radius * (inv_rf + inv_rb)
                                                           + self._total_mass * self.h * inv_rcm))
                      ) / self._inertia_bike
        theta_ddot = (torque - self._inertia_dv * self._sigma_dot * omega_dot) / self._inertia_dl

        lo, hi = self.state_low, self.state_high
        omega_dot = min(max(omega_dot + self.dt * omega_ddot, lo[3]), hi[3])
        omega = min(max(omega + self.dt * omega_dot, lo[2]), hi[2])
        theta_dot = min(max(theta_dot + self.dt * theta_ddot, lo[1]), hi[1])
        theta = theta + self.dt * theta_dot
        if abs(theta) > self.handlebar_limit:
            theta = math.copysign(self.handlebar_limit, theta)
            theta_dot = 0.0
        return np.array([theta, theta_dot, omega, omega_dot])

    def has_fallen(self, state):
        return abs(state[2]) > self.fall_angle

    def is_terminal(self, next_state):
        return self.has_fallen(next_state) or self.t >= self.horizon

    def reward(self, state, action_value, next_state, terminal):
        return self.fall_reward if self.has_fallen(next_state) else 1.0

    def balance_time(self, n_steps):
        return n_steps * self.dt
