"""Target-apprentice transfer: run a mapped source policy in the target task,
corrected online by the discrepancy between the projected source model and
the apprentice model of the target.

At each target state ``s``:

1. map ``s`` into the source task and take the source-greedy action ``a``;
2. step the source simulator and map the successor back, giving the state
   the source policy "intends" to reach, ``s_hat``;
3. compare with the apprentice's prediction for the equivalent target
   action, ``c = s_hat - P_hat(s, a)``;
4. apply ``a + K c[actuated]`` with ``K = 1 / B_hat``.

Discrete-only targets cannot take a continuous correction; there the target
action whose apprentice prediction lands closest to ``s_hat`` is chosen.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import rng as _rng
from .alignment import InterTaskMap, map_action, map_state, unmap_state
from .apprentice import B_MIN, ModelErrorReport
from .envs.base import wrap_angle
from .errors import NumericalFault, TatlError
from .fqi import greedy_action
from .mdp import Trajectory, Transition

__all__ = [
    "TransferContext",
    "AdaptiveCorrection",
    "StepDecision",
    "TransferResult",
    "TheoremReport",
    "projected_source_next",
    "adaptive_correction",
    "composite_action",
    "run_transfer",
    "theorem_diagnostics",
    "transfer_log_csv",
]


@dataclass
class TransferContext:
    source_q: object
    source_env: object
    apprentice: object
    map: InterTaskMap
    target_action_set: object
    target_angle_dims: tuple = ()
    continuous: bool = True
    b_min: float = B_MIN
    clamp_factor: float = 3.0

    def __post_init__(self):
        src, tgt = self.source_env.action_set, self.target_action_set
        map_action(0, src, tgt)  # raises on cardinality mismatch
        if self.continuous:
            if tgt.action_dim != 1:
                raise TatlError("continuous correction needs scalar target actions")
            self.apprentice.check_gain(self.b_min)
        self.target_angle_dims = tuple(self.target_angle_dims)

    @classmethod
    def build(cls, source_q, source_env, apprentice, imap, target_env, **kw):
        return cls(source_q, source_env, apprentice, imap, target_env.action_set,
                   tuple(getattr(target_env, "angle_dims", ())),
                   bool(target_env.continuous_actuation), **kw)

    @property
    def gain(self):
        """Mixture coefficient ``K = 1 / B_hat`` in the actuated row."""
        return 1.0 / self.apprentice.gain

    @property
    def action_limit(self):
        return self.clamp_factor * self.target_action_set.max_magnitude

    def diff(self, a, b):
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self.target_angle_dims:
            idx = list(self.target_angle_dims)
            d[idx] = wrap_angle(d[idx])
        return d


class AdaptiveCorrection(NamedTuple):
    state_correction: np.ndarray
    action_correction: float


class StepDecision(NamedTuple):
    source_action: int
    target_action: int
    projected_next: np.ndarray
    correction: AdaptiveCorrection
    applied_value: np.ndarray
    clamped: bool


def projected_source_next(ctx, s_target):
    """``(s_hat_source, a_source, s_hat_target_next)``; no state is mutated."""
    s_src = map_state(ctx.map, np.asarray(s_target, dtype=float))
    a_src = greedy_action(ctx.source_q, s_src)
    nxt = ctx.source_env.simulate(s_src, ctx.source_env.action_set.value(a_src))
    if not np.all(np.isfinite(nxt)):
        raise NumericalFault("source simulator produced a non-finite state")
    return s_src, a_src, unmap_state(ctx.map, nxt)


def adaptive_correction(ctx, s_target, a_target_idx, s_hat_target_next):
    value = ctx.target_action_set.value(a_target_idx)
    c = ctx.diff(s_hat_target_next, ctx.apprentice.predict(s_target, value))
    if not ctx.continuous:
        return AdaptiveCorrection(c, 0.0)
    row = ctx.apprentice.actuated_dim
    return AdaptiveCorrection(c, ctx.gain * float(c[row]) if c[row] != 0.0 else 0.0)


def _resolve_discrete(ctx, s_target, s_hat_next, preferred):
    """Target action whose predicted successor is nearest ``s_hat_next``;
    ties go to ``preferred``, then to the lowest index."""
    best, best_d = preferred, None
    order = [preferred] + [i for i in range(ctx.target_action_set.cardinality) if i != preferred]
    for i in order:
        pred = ctx.apprentice.predict(s_target, ctx.target_action_set.value(i))
        d = float(np.linalg.norm(ctx.diff(s_hat_next, pred)))
        if best_d is None or d < best_d - 1e-12:
            best, best_d = i, d
    return best


def composite_action(ctx, s_target):
    """Decide the action to apply at ``s_target``."""
    _, a_src, s_hat = projected_source_next(ctx, s_target)
    a_tgt = map_action(a_src, ctx.source_env.action_set, ctx.target_action_set)
    corr = adaptive_correction(ctx, s_target, a_tgt, s_hat)
    if not ctx.continuous:
        idx = _resolve_discrete(ctx, s_target, s_hat, a_tgt)
        return StepDecision(a_src, idx, s_hat, corr, ctx.target_action_set.value(idx), False)
    if not np.isfinite(corr.action_correction):
        err = float(np.linalg.norm(corr.state_correction))
        fault = NumericalFault("non-finite adaptive correction")
        fault.report = ModelErrorReport(err, err)
        raise fault
    base = float(ctx.target_action_set.value(a_tgt)[0])
    applied = base + corr.action_correction
    lim = ctx.action_limit
    clamped = abs(applied) > lim
    if clamped:
        applied = float(np.clip(applied, -lim, lim))
    return StepDecision(a_src, a_tgt, s_hat, corr, np.array([applied]), clamped)


@dataclass
class TransferResult:
    trajectories: list
    episode_rewards: list
    correction_bound: float = 0.0
    clamp_events: int = 0
    deviations: list = field(default_factory=list)  # per episode, per step
    log: list = field(default_factory=list)

    @property
    def average_reward(self):
        return float(np.mean(self.episode_rewards))


def run_transfer(ctx, target_env, episodes, seed, max_steps=None, keep_log=False):
    """Execute the composite policy for ``episodes`` episodes; no learning.

    ``deviations[e][i]`` is the distance between the reached state and the
    projected source successor at step ``i`` of episode ``e``.
    """
    before = (ctx.source_q.fingerprint(), ctx.apprentice.fingerprint())
    max_steps = target_env.horizon if max_steps is None else int(max_steps)
    res = TransferResult([], [])
    for ep in range(episodes):
        s = target_env.reset(seed=_rng.child_seed(seed, "transfer-episode", ep))
        traj = Trajectory(seed=seed)
        dev = []
        for step in range(max_steps):
            dec = composite_action(ctx, s)
            if ctx.continuous:
                nxt, r, term = target_env.step_value(dec.applied_value)
            else:
                nxt, r, term = target_env.step(dec.target_action)
            if not np.all(np.isfinite(nxt)):
                raise NumericalFault("target environment produced a non-finite state", step=step)
            res.correction_bound = max(res.correction_bound, abs(dec.correction.action_correction))
            res.clamp_events += int(dec.clamped)
            dev.append(float(np.linalg.norm(ctx.diff(nxt, dec.projected_next))))
            traj.transitions.append(Transition(s, dec.target_action, nxt, float(r), bool(term),
                                               dec.applied_value))
            if keep_log:
                res.log.append((ep, step, s, dec.source_action, dec.correction.state_correction,
                                dec.applied_value if ctx.continuous else dec.target_action, float(r)))
            s = nxt
            if term:
                break
        res.trajectories.append(traj)
        res.episode_rewards.append(traj.total_reward)
        res.deviations.append(dev)
    after = (ctx.source_q.fingerprint(), ctx.apprentice.fingerprint())
    if before != after:
        raise TatlError("transfer mutated the source Q or the apprentice")
    return res


def transfer_log_csv(res):
    """Per-step log as CSV text."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if not res.log:
        return ""
    d = len(res.log[0][2])
    w.writerow(["episode", "step"] + [f"s_{i}" for i in range(d)] + ["source_action"]
               + [f"c_{i}" for i in range(len(res.log[0][4]))] + ["applied_action", "reward"])
    for ep, step, s, a, c, applied, r in res.log:
        av = applied if np.isscalar(applied) else float(np.asarray(applied).ravel()[0])
        w.writerow([ep, step] + [repr(float(v)) for v in s] + [a] + [repr(float(v)) for v in c]
                   + [repr(float(av)), repr(r)])
    return out.getvalue()


@dataclass
class TheoremReport:
    alpha: float
    epsilon_hat: float
    return_gap: float
    transfer_return: float
    oracle_return: float


def theorem_diagnostics(ctx, target_env, true_gain, oracle_policy, episodes=1, seed=0):
    """Gain ratio, mean per-step deviation from the projected source successor,
    and the return gap to ``oracle_policy`` on the same episode seeds."""
    from .mdp import rollout

    res = run_transfer(ctx, target_env, episodes, seed)
    oracle = [rollout(target_env, oracle_policy, target_env.horizon,
                      _rng.child_seed(seed, "transfer-episode", ep)).total_reward
              for ep in range(episodes)]
    eps = float(np.mean([np.mean(d) for d in res.deviations if d]))
    return TheoremReport(
        alpha=float(true_gain / ctx.apprentice.gain),
        epsilon_hat=eps,
        return_gap=abs(res.average_reward - float(np.mean(oracle))),
        transfer_return=res.average_reward,
        oracle_return=float(np.mean(oracle)),
    )
