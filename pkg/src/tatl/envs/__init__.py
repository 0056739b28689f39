"""Benchmark tasks: grid world, inverted pendulum, mountain car, cart-pole, bicycle."""

from .base import Environment, wrap_angle
from .bicycle import Bicycle
from .cartpole import CartPole
from .gridworld import GridWorld
from .mountain_car import MountainCar
from .pendulum import InvertedPendulum, reward_quadratic

__all__ = [
    "Environment",
    "wrap_angle",
    "GridWorld",
    "InvertedPendulum",
    "MountainCar",
    "CartPole",
    "Bicycle",
    "reward_quadratic",
    "make",
]

_REGISTRY = {
    "grid": lambda **kw: GridWorld.default(windy=False, **kw),
    "windy_grid": lambda **kw: GridWorld.default(windy=True, **kw),
    "pendulum": InvertedPendulum,
    "pendulum_time_varying": lambda **kw: InvertedPendulum(time_varying=True, **kw),
    "pendulum_flipped": lambda **kw: InvertedPendulum(control_sign=-1.0, **kw),
    "mountain_car": MountainCar,
    "cart_pole": CartPole,
    "bicycle": Bicycle,
}


def make(name, **overrides):
    """Construct a task by registry name, with keyword parameter overrides."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**overrides)
