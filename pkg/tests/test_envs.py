import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tatl.envs import (Bicycle, CartPole, GridWorld, InvertedPendulum, MountainCar, make,
                       reward_quadratic, wrap_angle)
from tatl.mdp import ConstantPolicy, RandomPolicy, rollout

UP, DOWN, RIGHT, LEFT = 0, 1, 2, 3


def test_make_rejects_unknown():
    with pytest.raises(ValueError):
        make("nope")


@given(st.floats(-50, 50))
def test_wrap_angle_range(x):
    w = float(wrap_angle(x))
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)


# -- grid world --------------------------------------------------------------

def test_grid_reaches_goal():
    g = GridWorld.default()
    gx, gy = g.goal
    assert g.grid_step((gx - 1, gy), g.action_set.value(RIGHT)) == (g.goal, 10.0, True)


def test_grid_obstacle_bump():
    g = GridWorld.default()
    assert (4, 10) in g.obstacles
    assert g.grid_step((3, 10), g.action_set.value(RIGHT)) == ((3, 10), -1.0, False)


def test_grid_wind_composite_and_clamp():
    text = "\n".join([
        ". . . .",
        ". w+0+1 . .",
        ". . . G",
    ])
    g = GridWorld.from_text(text, windy=True)
    # right from the windy cell, then pushed up one
    assert g.grid_step((1, 1), g.action_set.value(RIGHT)) == ((2, 2), 0.0, False)
    # up from the windy cell lands on the top row; the extra push is clamped
    assert g.grid_step((1, 1), g.action_set.value(UP)) == ((1, 2), 0.0, False)
    # wind only acts in the windy variant
    calm = g.without_wind()
    assert calm.grid_step((1, 1), calm.action_set.value(RIGHT)) == ((2, 1), 0.0, False)


def test_grid_wind_into_obstacle_is_blocked():
    text = "\n".join([
        ". # .",
        "w+0+1 . .",
        ". . G",
    ])
    g = GridWorld.from_text(text, windy=True)
    assert g.grid_step((0, 1), g.action_set.value(RIGHT)) == ((1, 1), 0.0, False)


@given(st.integers(0, 19), st.integers(0, 19), st.integers(0, 3), st.booleans())
def test_grid_step_stays_on_free_cells(x, y, a, windy):
    g = GridWorld.default(windy=windy)
    if (x, y) in g.obstacles:
        return
    (nx, ny), r, term = g.grid_step((x, y), g.action_set.value(a))
    assert 0 <= nx < g.width and 0 <= ny < g.height
    assert (nx, ny) not in g.obstacles
    assert r in (-1.0, 0.0, 10.0) and term == ((nx, ny) == g.goal)


def test_grid_every_free_cell_is_reachable():
    g = GridWorld.default(windy=True)
    hit = set()
    for c in g.free_cells:
        for a in range(4):
            hit.add(g.grid_step(c, g.action_set.value(a))[0])
    assert set(g.free_cells) <= hit


def test_grid_layout_errors():
    with pytest.raises(ValueError):
        GridWorld.from_text(". .\n. .")
    with pytest.raises(ValueError):
        GridWorld.from_text(". G\n. x")
    with pytest.raises(ValueError):
        GridWorld.from_text(". G .\n. .")


# -- pendulum ----------------------------------------------------------------

def test_pendulum_upright_equilibrium():
    p = InvertedPendulum()
    p.reset(state=[0.0, 0.0])
    s, r, term = p.step(1)
    assert np.array_equal(s, [0.0, 0.0]) and r == 0.0 and not term


def test_pendulum_reward_formula():
    assert reward_quadratic([math.pi / 2, 0.0]) == pytest.approx(-24.674011, abs=1e-6)
    assert reward_quadratic([0.5, 1.0]) == pytest.approx(-7.5)


def test_pendulum_time_varying_parameters():
    p = InvertedPendulum(time_varying=True)
    assert p.parameters(0) == (1.5, 1.5)
    assert p.parameters(50) == pytest.approx((0.5, 0.5))
    for i in range(200):
        L, M = p.parameters(i)
        assert 0.5 - 1e-12 <= L <= 1.5 + 1e-12 and L == M


def test_pendulum_flipped_control():
    s0 = np.array([0.3, 0.0])
    a = InvertedPendulum().simulate(s0, [7.0]) - InvertedPendulum().simulate(s0, [0.0])
    b = InvertedPendulum(control_sign=-1).simulate(s0, [7.0]) - InvertedPendulum().simulate(s0, [0.0])
    assert a[1] > 0 and b[1] == pytest.approx(-a[1])


@given(st.integers(0, 1000))
def test_pendulum_state_bounds(seed):
    p = InvertedPendulum(time_varying=True)
    t = rollout(p, RandomPolicy(3), 200, seed)
    s = t.states
    assert np.all(np.abs(s) <= math.pi + 1e-12)


# -- mountain car ------------------------------------------------------------

def test_mountain_car_goal():
    mc = MountainCar()
    mc.reset(state=[0.59, 0.07])
    s, r, term = mc.step(2)
    assert s[0] == 0.6 and r == 0.0 and term


def test_mountain_car_left_wall():
    mc = MountainCar()
    mc.reset(state=[-1.19, -0.05])
    s, _, _ = mc.step(0)
    assert s[0] == -1.2 and s[1] == 0.0


def test_mountain_car_is_underpowered():
    t = rollout(MountainCar(), ConstantPolicy(2), 300, 0, initial_state=[-math.pi / 6, 0.0])
    assert not t.terminated and t.states[:, 0].max() < 0.0


@given(st.integers(0, 1000))
def test_mountain_car_bounds(seed):
    s = rollout(MountainCar(), RandomPolicy(3), 300, seed).states
    assert np.all((s[:, 0] >= -1.2) & (s[:, 0] <= 0.6))
    assert np.all(np.abs(s[:, 1]) <= 0.07)


# -- cart-pole ---------------------------------------------------------------

def test_cart_pole_equilibrium():
    cp = CartPole()
    cp.reset(state=np.zeros(4))
    s, _, term = cp.step(1)
    assert np.array_equal(s, np.zeros(4)) and not term


def test_cart_pole_non_minimum_phase():
    cp = CartPole()
    s = cp.simulate(np.zeros(4), [20.0])
    assert s[1] > 0 and s[3] < 0


@given(st.tuples(st.floats(-1, 1), st.floats(-2, 2), st.floats(-0.2, 0.2), st.floats(-2, 2)),
       st.sampled_from([-20.0, 20.0]))
def test_cart_pole_energy_audit(state, force):
    # trapezoidal work of the push against the energy change, relative to the work scale
    cp = CartPole()
    s = np.array(state)
    n = cp.simulate(s, [force])
    work = force * 0.5 * (s[1] + n[1]) * cp.dt
    scale = abs(force) * cp.dt * max(abs(s[1]), abs(n[1]), 1e-9)
    assert abs(cp.energy(n) - cp.energy(s) - work) <= 0.05 * scale


# -- bicycle -----------------------------------------------------------------

def test_bicycle_equilibrium():
    b = Bicycle(cg_noise=0.0)
    b.reset(0)
    s, r, term = b.step(1)
    assert np.array_equal(s, np.zeros(4)) and r == 1.0 and not term


def test_bicycle_falls_without_control():
    b = Bicycle()
    times = [len(rollout(b, ConstantPolicy(1), b.horizon, s)) * b.dt for s in range(5)]
    assert max(times) < 100.0


def test_bicycle_counter_steering():
    b = Bicycle(cg_noise=0.0)
    b.reset(0)
    for _ in range(30):
        s, _, _ = b.step(2)
    # positive handlebar torque steers right and the bike rolls the other way
    assert s[0] > 0 and s[2] < 0


def test_bicycle_noise_bounds():
    b = Bicycle()
    b.reset(3)
    d = [b._draw_noise() for _ in range(2000)]
    assert max(map(abs, d)) <= 0.02


def test_bicycle_time_cap():
    b = Bicycle(max_time=0.05, cg_noise=0.0)
    t = rollout(b, ConstantPolicy(1), 1000, 0)
    assert len(t) == 5 and t.terminated
