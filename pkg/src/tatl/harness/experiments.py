"""Experiment runs, per-(method, seed) records, summaries and plot data."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .pipeline import Artifacts, run_method

__all__ = [
    "ExperimentRecord",
    "reward_threshold",
    "samples_to_threshold",
    "assign_training_lengths",
    "run_experiment",
    "records_csv",
    "read_records_csv",
    "summarize",
    "emit_plot_data",
    "write_outputs",
]

log = logging.getLogger(__name__)

# run and report order; TA-TL goes first so its sample count can set baseline budgets
_ORDER = {"ta_tl": 0, "uma_tl": 1, "rl": 2}


@dataclass
class ExperimentRecord:
    experiment_id: str
    method: str
    seed: int
    samples: list
    rewards: list
    window: int = 50
    training_length: int | None = None
    balance_time_seconds: float | None = None

    def __post_init__(self):
        if len(self.samples) != len(self.rewards):
            raise ValueError("samples and rewards differ in length")
        if self.training_length is not None and self.training_length > self.total_samples:
            raise ValueError("training_length exceeds the total samples")

    @property
    def key(self):
        return (self.method, self.seed)

    @property
    def total_samples(self):
        return int(self.samples[-1]) if self.samples else 0

    @property
    def avg_reward(self):
        """Trailing windowed average reward per episode."""
        r = np.asarray(self.rewards, dtype=float)
        if not len(r):
            return r
        c = np.cumsum(np.insert(r, 0, 0.0))
        idx = np.arange(1, len(r) + 1)
        lo = np.maximum(0, idx - self.window)
        return (c[idx] - c[lo]) / (idx - lo)

    @property
    def final_avg_reward(self):
        w = self.avg_reward
        return float(w[-1]) if len(w) else float("nan")


def reward_threshold(best):
    """95% of ``best``; for a negative ``best``, 5% of its magnitude below it."""
    return best - 0.05 * abs(best)


def samples_to_threshold(rec, threshold):
    """Cumulative samples when the windowed reward first reaches
    ``threshold`` over a full window (or over every episode, for runs
    shorter than the window).  ``None`` if it never does."""
    w = rec.avg_reward
    start = min(rec.window, len(w)) - 1
    for i in range(max(start, 0), len(w)):
        if w[i] >= threshold:
            return int(rec.samples[i])
    return None


def assign_training_lengths(records):
    """Threshold from the best method's mean final windowed reward."""
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r.final_avg_reward)
    if not by_method:
        return None
    best = max(float(np.mean(v)) for v in by_method.values())
    thr = reward_threshold(best)
    for r in records:
        r.training_length = samples_to_threshold(r, thr)
    return thr


def _seed_records(cfg, seed, arts):
    out = []
    budget = None
    for method in sorted(cfg.methods, key=_ORDER.get):
        # the bicycle compares methods at TA-TL's target-sample budget
        b = budget if (cfg.target_env == "bicycle" and method != "ta_tl") else None
        run = run_method(cfg, arts, method, seed, budget=b)
        if method == "ta_tl":
            budget = run.curve.total_samples
        out.append(ExperimentRecord(cfg.experiment_id, method, seed, list(run.curve.samples),
                                    list(run.curve.rewards), cfg.window,
                                    balance_time_seconds=run.balance_time_seconds))
    return out


def _worker(cfg, seed, directory, build):
    return _seed_records(cfg, seed, Artifacts(cfg, directory, build))


def run_experiment(cfg, artifact_dir=None, build=True):
    """Every method on every seed, merged in (method, seed) order.

    Seeds fan out over ``cfg.workers`` processes.  Workers share the source
    Q through ``artifact_dir``; without one each worker trains its own,
    which gives the same Q because training is seeded.
    """
    arts = Artifacts(cfg, artifact_dir, build)
    arts.source()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            jobs = [ex.submit(_worker, cfg, s, artifact_dir, build) for s in cfg.seeds]
            parts = [j.result() for j in jobs]
    else:
        parts = [_seed_records(cfg, s, arts) for s in cfg.seeds]
    records = sorted((r for p in parts for r in p), key=lambda r: (_ORDER[r.method], r.seed))
    assign_training_lengths(records)
    return records


# -- CSV -----------------------------------------------------------------------

_COLUMNS = ["experiment", "method", "seed", "episode", "samples", "reward", "avg_reward", "window",
            "training_length", "balance_time_seconds"]


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def records_csv(records):
    """One row per (method, seed, episode)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(_COLUMNS)
    for r in records:
        avg = r.avg_reward
        for i, (s, rew) in enumerate(zip(r.samples, r.rewards)):
            w.writerow([r.experiment_id, r.method, r.seed, i, int(s), _num(float(rew)), _num(float(avg[i])),
                        r.window, _num(r.training_length), _num(r.balance_time_seconds)])
    return out.getvalue()


def read_records_csv(text):
    rows = {}
    for row in csv.DictReader(io.StringIO(text)):
        rows.setdefault((row["experiment"], row["method"], int(row["seed"])), []).append(row)
    out = []
    for (exp, method, seed), rs in rows.items():
        tl, bt = rs[0]["training_length"], rs[0]["balance_time_seconds"]
        out.append(ExperimentRecord(exp, method, seed, [int(r["samples"]) for r in rs],
                                    [float(r["reward"]) for r in rs], int(rs[0]["window"]),
                                    int(tl) if tl else None, float(bt) if bt else None))
    return out


# -- summary -------------------------------------------------------------------

def _stats(values):
    v = [x for x in values if x is not None and not math.isnan(x)]
    if not v:
        return float("nan"), float("nan")
    return float(np.mean(v)), float(np.std(v))


def summarize(records):
    """Per-method mean and std of training length and final windowed reward
    over seeds, with the training-length ratio to TA-TL.  Returns CSV text."""
    if not records:
        raise ValueError("nothing to summarize")
    methods = sorted({r.method for r in records}, key=lambda m: _ORDER.get(m, 99))
    rows = {}
    for m in methods:
        rs = [r for r in records if r.method == m]
        tl_mean, tl_std = _stats([r.training_length for r in rs])
        fr_mean, fr_std = _stats([r.final_avg_reward for r in rs])
        bt_mean, bt_std = _stats([r.balance_time_seconds for r in rs])
        rows[m] = [m, len(rs), sum(r.training_length is not None for r in rs),
                   tl_mean, tl_std, fr_mean, fr_std, bt_mean, bt_std]
    ta = rows.get("ta_tl", [None] * 4)[3]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["method", "seeds", "reached", "training_length_mean", "training_length_std",
                "final_avg_reward_mean", "final_avg_reward_std", "balance_time_mean",
                "balance_time_std", "training_length_ratio_to_ta_tl"])
    for m in methods:
        row = rows[m]
        ratio = row[3] / ta if ta and not math.isnan(ta) and not math.isnan(row[3]) else float("nan")
        w.writerow(row[:3] + [_num(x) for x in row[3:]] + [_num(ratio)])
    return out.getvalue()


# -- plot data -----------------------------------------------------------------

def _step_value(samples, values, x):
    i = int(np.searchsorted(samples, x, side="right")) - 1
    return float(values[max(i, 0)])


def emit_plot_data(records, out_dir, points=100):
    """``<exp>_avg_reward.dat`` and ``<exp>_training_length.dat`` per
    experiment.  Reward bands are the min and max over seeds of the windowed
    reward on a common sample grid.  Returns the written paths."""
    if not records:
        log.warning("no records: no plot data written")
        return []
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for exp in sorted({r.experiment_id for r in records}):
        recs = [r for r in records if r.experiment_id == exp]
        methods = sorted({r.method for r in recs}, key=lambda m: _ORDER.get(m, 99))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "samples", "avg_reward_mean", "avg_reward_lo", "avg_reward_hi"])
        for m in methods:
            rs = [r for r in recs if r.method == m and r.samples]
            if not rs:
                continue
            lo_x = max(r.samples[0] for r in rs)
            hi_x = min(r.total_samples for r in rs)
            grid = [hi_x] if hi_x <= lo_x else np.unique(np.linspace(lo_x, hi_x, points).astype(int))
            for x in grid:
                vals = np.array([_step_value(np.asarray(r.samples), r.avg_reward, x) for r in rs])
                w.writerow([m, int(x), _num(vals.mean()), _num(vals.min()), _num(vals.max())])
        p = os.path.join(out_dir, f"{exp}_avg_reward.dat")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
        paths.append(p)

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "training_length_mean", "training_length_lo", "training_length_hi", "reached"])
        for m in methods:
            tl = [r.training_length for r in recs if r.method == m and r.training_length is not None]
            if tl:
                w.writerow([m, _num(float(np.mean(tl))), min(tl), max(tl), len(tl)])
            else:
                w.writerow([m, "nan", "", "", 0])
        p = os.path.join(out_dir, f"{exp}_training_length.dat")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
        paths.append(p)
    return paths


def write_outputs(records, out_dir, experiment_id):
    """Records CSV, summary CSV and plot data; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, text in ((f"{experiment_id}_records.csv", records_csv(records)),
                       (f"{experiment_id}_summary.csv", summarize(records) if records else "")):
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(p)
    return paths + emit_plot_data(records, out_dir)
