"""Comparison methods: value-initialised transfer and learning from scratch."""

from __future__ import annotations

import numpy as np

from . import rng as _rng
from .alignment import map_action
from .fqi import LinearQ, fqi_train

__all__ = ["source_state_sample", "initial_weights_from_source", "run_uma_tl", "run_rl_no_transfer"]


def source_state_sample(source_q, source_env, n_states, seed, explore=0.3):
    """``n_states`` states from epsilon-greedy rollouts of the source policy."""
    g = _rng.stream(seed, "uma-tl", "explore")
    states = []
    episode = 0
    while len(states) < n_states:
        s = source_env.reset(seed=_rng.child_seed(seed, "uma-tl", "episode", episode))
        episode += 1
        for _ in range(source_env.horizon):
            states.append(s)
            if len(states) >= n_states:
                break
            if g.random() < explore:
                a = int(g.integers(source_q.n_actions))
            else:
                a = int(np.argmax(source_q.values(s)))
            s, _, terminal = source_env.step(a)
            if terminal:
                break
    return np.array(states)


def initial_weights_from_source(source_q, imap, target_basis, source_states):
    """Least-squares target weights reproducing the source Q-values at the
    mapped states (one column per action)."""
    targets = source_q.values_batch(source_states)
    mapped = imap.to_target(source_states)
    phi = target_basis.features(mapped)
    w, *_ = np.linalg.lstsq(phi, targets, rcond=None)
    return w


def run_uma_tl(source_q, imap, source_env, target_env, cfg, seed, target_basis=None, n_states=2000,
               explore=0.3):
    """Initialise target Q from the mapped source Q, then train with FQI.

    The initialisation uses only the source simulator and the map, so the
    learning curve counts target samples from the first FQI episode on.
    """
    map_action(0, source_env.action_set, target_env.action_set)
    basis = source_q.basis if target_basis is None else target_basis
    states = source_state_sample(source_q, source_env.copy(), n_states, seed, explore)
    w0 = initial_weights_from_source(source_q, imap, basis, states)
    q0 = LinearQ(basis, target_env.action_set.cardinality, w0, cfg.learning_rate)
    return fqi_train(target_env, cfg, q0, seed)


def run_rl_no_transfer(target_env, cfg, seed, basis):
    """FQI from zero weights in the target."""
    q0 = LinearQ(basis, target_env.action_set.cardinality, learning_rate=cfg.learning_rate)
    return fqi_train(target_env, cfg, q0, seed)
