"""Building blocks shared by the CLI and the experiment runner: environments
and bases from a config, source training, per-seed maps and apprentices,
and the three methods' runs."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .. import rng as _rng
from ..alignment import AlignmentDataset, InterTaskMap, fit_alignment, load_map, map_action, map_state, save_map
from ..apprentice import (ApprenticeConfig, collect_random_data, default_basis, learn_apprentice,
                          load_apprentice, save_apprentice)
from ..baselines import run_rl_no_transfer, run_uma_tl
from ..envs import GridWorld, make
from ..errors import MissingArtifactError
from ..fqi import (FqiConfig, GreedyPolicy, LearningCurve, LinearBasis, LinearQ, OneHotBasis, fqi_train,
                   greedy_action, load_q, rbf_lattice, save_q)
from ..mdp import Policy, Transition, rollout
from ..transfer import TransferContext, run_transfer

__all__ = [
    "source_env",
    "target_env",
    "make_basis",
    "fqi_config",
    "grid_dataset",
    "evaluate_greedy",
    "train_source",
    "MappedSourcePolicy",
    "build_map",
    "build_apprentice",
    "artifact_key",
    "Artifacts",
    "MethodRun",
    "run_method",
]


def source_env(cfg):
    return make(cfg.source_env, **cfg.source_env_overrides)


def target_env(cfg):
    return make(cfg.target_env, **cfg.target_env_overrides)


def make_basis(settings, env):
    if settings.basis == "onehot":
        if not isinstance(env, GridWorld):
            raise ValueError("one-hot basis needs a grid world")
        return OneHotBasis(env.free_cells)
    if settings.basis == "linear":
        return LinearBasis(env.state_dim)
    return rbf_lattice(env.state_low, env.state_high, settings.rbf_centers, settings.rbf_bandwidth,
                       normalize=settings.rbf_normalize)


def fqi_config(settings, sample_budget=None, **kw):
    base = dict(iterations=settings.iterations, learning_rate=settings.learning_rate,
                discount=settings.discount, eps_start=settings.eps_start, eps_end=settings.eps_end,
                eps_decay_fraction=settings.eps_decay_fraction, update=settings.update,
                sample_budget=sample_budget)
    base.update(kw)
    return FqiConfig(**base)


def grid_dataset(env):
    """Every (free cell, action) transition once: the exhaustive tabular batch."""
    data = []
    for cell in env.free_cells:
        for a in range(env.action_set.cardinality):
            nxt, r, term = env.grid_step(cell, env.action_set.value(a))
            data.append(Transition(np.array(cell, float), a, np.array(nxt, float), r, term))
    return data


def evaluate_greedy(env, q, episodes, seed):
    """Mean greedy return and mean episode length over seeded episodes."""
    runs = [rollout(env, GreedyPolicy(q), env.horizon, _rng.child_seed(seed, "evaluate", j))
            for j in range(episodes)]
    return float(np.mean([t.total_reward for t in runs])), float(np.mean([len(t) for t in runs]))


def train_source(cfg):
    """Source Q and its greedy evaluation ``(mean_return, mean_length)``.

    A one-hot basis on a grid is solved in batch over the exhaustive
    transition set.  Otherwise FQI runs online; with ``chunks > 1`` the
    run is split, each chunk continues the exploration schedule, and the
    chunk whose greedy policy evaluates best is kept.
    """
    s = cfg.source
    env = source_env(cfg)
    q0 = LinearQ(make_basis(s, env), env.action_set.cardinality, learning_rate=s.learning_rate)
    if s.basis == "onehot":
        q, _ = fqi_train(None, fqi_config(s, tol=1e-12), q0, s.seed, dataset=grid_dataset(env))
        return q, evaluate_greedy(env, q, s.eval_episodes, s.seed)
    if s.chunks == 1:
        q, _ = fqi_train(env, fqi_config(s), q0, s.seed)
        return q, evaluate_greedy(env, q, s.eval_episodes, s.seed)
    full = fqi_config(s)
    n = s.iterations // s.chunks
    q, best, best_eval = q0, None, None
    for c in range(s.chunks):
        part = fqi_config(s, iterations=n, eps_start=full.epsilon(c * n),
                          eps_end=full.epsilon((c + 1) * n), eps_decay_fraction=1.0)
        q, _ = fqi_train(env, part, q, _rng.child_seed(s.seed, "source-chunk", c))
        ev = evaluate_greedy(env, q, s.eval_episodes, s.seed)
        if best_eval is None or ev[0] > best_eval[0]:
            best, best_eval = q.copy(), ev
    return best, best_eval


class MappedSourcePolicy(Policy):
    """Source-greedy action at the mapped state, uncorrected."""

    def __init__(self, source_q, imap, source_actions, target_actions):
        self.q, self.map = source_q, imap
        self.src, self.tgt = source_actions, target_actions

    def __call__(self, state):
        a = greedy_action(self.q, map_state(self.map, np.asarray(state, dtype=float)))
        return map_action(a, self.src, self.tgt)


def _apprentice_config(cfg):
    a = cfg.apprentice
    return ApprenticeConfig(trials=a.trials, steps_per_trial=a.steps_per_trial,
                            utility_gap_tol=max(a.zeta, 1e-12), max_refits=a.max_refits)


def build_map(cfg, seed):
    """Identity for same-domain experiments.  Otherwise the map is fit on
    random source data and the first apprentice batch of target data, so
    alignment costs no target samples beyond the apprentice's."""
    src, tgt = source_env(cfg), target_env(cfg)
    a = cfg.alignment
    if a.identity:
        if src.state_dim != tgt.state_dim:
            raise ValueError("identity map needs equal state dimensions")
        return InterTaskMap.identity(src.state_dim)
    sd = collect_random_data(src, ApprenticeConfig(a.trials, a.steps_per_trial),
                             _rng.child_seed(a.seed, "alignment-source", seed))
    td = collect_random_data(tgt, _apprentice_config(cfg), seed)
    ds = AlignmentDataset.from_transitions(sd, td, src, tgt)
    return fit_alignment(ds, knn=a.knn, latent_dim=a.latent_dim or None,
                         round_trip_bound=a.round_trip_bound)


def build_apprentice(cfg, seed, source_q, imap, source_return):
    """Apprentice learning with the utility-gap stop rule on the mapped
    source policy.  ``zeta = 0`` in the config means 5% of
    ``|source_return|``."""
    src, tgt = source_env(cfg), target_env(cfg)
    acfg = _apprentice_config(cfg)
    if cfg.apprentice.zeta <= 0:
        acfg = ApprenticeConfig(acfg.trials, acfg.steps_per_trial,
                                max(0.05 * abs(source_return), 1e-12), acfg.max_refits)
    policy = MappedSourcePolicy(source_q, imap, src.action_set, tgt.action_set)
    return learn_apprentice(tgt, acfg, seed, basis=default_basis(tgt), policy=policy,
                            gap_trials=cfg.apprentice.gap_trials)


def artifact_key(cfg):
    """``<experiment>_<hash>``: the hash covers every setting that shapes the
    source Q, the maps or the apprentices, so a changed config never picks
    up stale files."""
    parts = [cfg.experiment_id, cfg.source_env, cfg.target_env,
             repr(sorted(cfg.source_env_overrides.items())), repr(sorted(cfg.target_env_overrides.items()))]
    parts += [repr(dataclasses.astuple(getattr(cfg, k))) for k in ("source", "apprentice", "alignment")]
    digest = hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()[:10]
    return f"{cfg.experiment_id}_{digest}"


@dataclass
class Artifacts:
    """Source Q plus per-seed maps and apprentices, cached on disk under
    ``directory/<artifact_key>`` when ``directory`` is set.  With
    ``build=False`` a missing file is an error."""

    cfg: object
    directory: str | None = None
    build: bool = True
    _source: tuple | None = None
    _maps: dict = field(default_factory=dict)
    _apprentices: dict = field(default_factory=dict)

    @property
    def cache_dir(self):
        return None if self.directory is None else os.path.join(self.directory, artifact_key(self.cfg))

    def path(self, name):
        return None if self.directory is None else os.path.join(self.cache_dir, name)

    def _missing(self, what, path):
        raise MissingArtifactError(f"{what} not found at {path} and building is disabled")

    def source(self):
        """``(source_q, source_return)``."""
        if self._source is None:
            path = self.path("source_q.txt")
            if path and os.path.exists(path):
                q = load_q(path)
                ev = evaluate_greedy(source_env(self.cfg), q, self.cfg.source.eval_episodes,
                                     self.cfg.source.seed)
            elif not self.build:
                self._missing("source Q", path)
            else:
                q, ev = train_source(self.cfg)
                if path:
                    os.makedirs(self.cache_dir, exist_ok=True)
                    save_q(q, path)
            self._source = (q, ev[0])
        return self._source

    def map(self, seed):
        if seed not in self._maps:
            path = self.path(f"map_seed{seed}.txt")
            if path and os.path.exists(path):
                m = load_map(path)
            elif not self.build:
                self._missing("inter-task map", path)
            else:
                m = build_map(self.cfg, seed)
                if path:
                    os.makedirs(self.cache_dir, exist_ok=True)
                    save_map(m, path)
            self._maps[seed] = m
        return self._maps[seed]

    def apprentice(self, seed):
        """``(model, target_samples)``; a cached model records its sample
        count in a sidecar file."""
        if seed not in self._apprentices:
            path = self.path(f"apprentice_seed{seed}.txt")
            if path and os.path.exists(path) and os.path.exists(path + ".samples"):
                with open(path + ".samples", encoding="utf-8") as fh:
                    n = int(fh.read().strip())
                self._apprentices[seed] = (load_apprentice(path), n)
            elif not self.build:
                self._missing("apprentice", path)
            else:
                q, ret = self.source()
                res = build_apprentice(self.cfg, seed, q, self.map(seed), ret)
                if path:
                    os.makedirs(self.cache_dir, exist_ok=True)
                    save_apprentice(res.model, path)
                    with open(path + ".samples", "w", encoding="utf-8") as fh:
                        fh.write(f"{res.samples}\n")
                self._apprentices[seed] = (res.model, res.samples)
        return self._apprentices[seed]


@dataclass
class MethodRun:
    method: str
    seed: int
    curve: LearningCurve
    balance_time_seconds: float | None = None
    clamp_events: int = 0


def _balance_seconds(env, lengths):
    dt = getattr(env, "dt", None)
    return float(np.mean(lengths)) * dt if dt is not None else None


def run_method(cfg, arts, method, seed, budget=None):
    """One method on one seed.

    TA-TL's curve holds one point per transfer episode, all at the
    apprentice's sample count, since transfer itself learns nothing.
    ``budget`` caps the target samples of the learning baselines.
    """
    tgt = target_env(cfg)
    is_bike = cfg.target_env == "bicycle"
    if method == "ta_tl":
        q, _ = arts.source()
        model, n = arts.apprentice(seed)
        ctx = TransferContext.build(q, source_env(cfg), model, arts.map(seed), tgt,
                                    clamp_factor=cfg.transfer.clamp_factor)
        res = run_transfer(ctx, tgt, cfg.transfer.episodes, seed)
        curve = LearningCurve()
        for r in res.episode_rewards:
            curve.append(n, r)
        bal = _balance_seconds(tgt, [len(t) for t in res.trajectories]) if is_bike else None
        return MethodRun(method, seed, curve, bal, res.clamp_events)
    fcfg = fqi_config(cfg.rl, sample_budget=budget)
    basis = make_basis(cfg.rl, tgt)
    if method == "uma_tl":
        q, _ = arts.source()
        trained, curve = run_uma_tl(q, arts.map(seed), source_env(cfg), tgt, fcfg, seed,
                                    target_basis=basis, n_states=cfg.uma_tl.n_states,
                                    explore=cfg.uma_tl.explore)
    elif method == "rl":
        trained, curve = run_rl_no_transfer(tgt, fcfg, seed, basis)
    else:
        raise ValueError(f"unknown method {method!r}")
    bal = None
    if is_bike:
        runs = [rollout(tgt, GreedyPolicy(trained), tgt.horizon, _rng.child_seed(seed, "transfer-episode", j))
                for j in range(cfg.transfer.episodes)]
        bal = _balance_seconds(tgt, [len(t) for t in runs])
    return MethodRun(method, seed, curve, bal)
