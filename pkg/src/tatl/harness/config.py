"""Experiment configuration: typed sections, defaults per experiment, and a
flat ``key = value`` text format with ``[section]`` headers.

``parse_config(emit_config(cfg)) == cfg`` holds for every valid config.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

EXPERIMENTS = ("grid", "ip_timevarying", "mc_to_ip", "cartpole_to_bicycle", "negative_transfer")
METHODS = ("ta_tl", "uma_tl", "rl")
SCALES = ("desk", "paper")


@dataclass
class LearnerSettings:
    """FQI run plus the Q basis it learns over.

    ``basis`` is ``onehot``, ``linear`` or ``rbf``; the ``rbf_*`` keys only
    matter for ``rbf``.  ``chunks > 1`` splits the run and keeps the chunk
    whose greedy policy evaluates best (source training only).
    """

    iterations: int = 1000
    learning_rate: float = 5e-3
    discount: float = 0.98
    update: str = "episode"
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    basis: str = "rbf"
    rbf_centers: int = 20
    rbf_bandwidth: float = 1.2
    rbf_normalize: bool = False
    chunks: int = 1
    eval_episodes: int = 10
    seed: int = 1


@dataclass
class UmaSettings:
    n_states: int = 2000
    explore: float = 0.3


@dataclass
class ApprenticeSettings:
    trials: int = 10
    steps_per_trial: int = 100
    # utility-gap tolerance; 0 means 5% of the source policy's return magnitude
    zeta: float = 0.0
    max_refits: int = 5
    gap_trials: int = 5


@dataclass
class AlignmentSettings:
    identity: bool = True
    trials: int = 10
    steps_per_trial: int = 100
    knn: int = 10
    # 0 means min(source_dim, target_dim)
    latent_dim: int = 0
    round_trip_bound: float = 0.1
    seed: int = 7


@dataclass
class TransferSettings:
    episodes: int = 50
    clamp_factor: float = 3.0


@dataclass
class ExperimentConfig:
    experiment_id: str
    methods: tuple = METHODS
    seeds: tuple = tuple(range(10))
    scale: str = "desk"
    source_env: str = "pendulum"
    target_env: str = "pendulum"
    window: int = 50
    workers: int = 1
    source_env_overrides: dict = field(default_factory=dict)
    target_env_overrides: dict = field(default_factory=dict)
    source: LearnerSettings = field(default_factory=LearnerSettings)
    rl: LearnerSettings = field(default_factory=LearnerSettings)
    uma_tl: UmaSettings = field(default_factory=UmaSettings)
    apprentice: ApprenticeSettings = field(default_factory=ApprenticeSettings)
    alignment: AlignmentSettings = field(default_factory=AlignmentSettings)
    transfer: TransferSettings = field(default_factory=TransferSettings)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self):
        if self.experiment_id not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment_id!r}; known: {list(EXPERIMENTS)}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; known: {list(METHODS)}")
        if not self.methods:
            raise ValueError("an experiment needs at least one method")
        if not self.seeds:
            raise ValueError("an experiment needs at least one seed")
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {list(SCALES)}")
        if self.window < 1 or self.workers < 1:
            raise ValueError("window and workers must be >= 1")
        for s in (self.source, self.rl):
            if s.basis not in ("onehot", "linear", "rbf"):
                raise ValueError(f"unknown basis {s.basis!r}")
            if s.chunks < 1:
                raise ValueError("chunks must be >= 1")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


_SECTIONS = ("source", "rl", "uma_tl", "apprentice", "alignment", "transfer")
_TOP = ("experiment_id", "methods", "seeds", "scale", "source_env", "target_env", "window", "workers")


def default_config(experiment_id, scale="desk"):
    """Tuned defaults for one of the five experiments."""
    ip_learner = LearnerSettings(iterations=1000, learning_rate=5e-3, discount=0.98,
                                 basis="rbf", rbf_centers=20, rbf_bandwidth=1.2)
    if experiment_id == "grid":
        tabular = LearnerSettings(iterations=2000, learning_rate=0.5, discount=0.95, update="step",
                                  basis="onehot")
        cfg = ExperimentConfig(
            experiment_id, source_env="grid", target_env="windy_grid",
            source=dataclasses.replace(tabular, iterations=5000, learning_rate=1.0),
            rl=dataclasses.replace(tabular, iterations=1000),
            apprentice=ApprenticeSettings(trials=200, steps_per_trial=5, max_refits=12, gap_trials=10),
            transfer=TransferSettings(episodes=100),
        )
    elif experiment_id == "ip_timevarying":
        cfg = ExperimentConfig(
            experiment_id, source_env="pendulum", target_env="pendulum_time_varying",
            source=ip_learner, rl=dataclasses.replace(ip_learner, iterations=700),
            apprentice=ApprenticeSettings(trials=5, steps_per_trial=100),
        )
    elif experiment_id == "negative_transfer":
        cfg = ExperimentConfig(
            experiment_id, source_env="pendulum", target_env="pendulum_flipped",
            source=ip_learner, rl=dataclasses.replace(ip_learner, iterations=700),
            apprentice=ApprenticeSettings(trials=5, steps_per_trial=100),
        )
    elif experiment_id == "mc_to_ip":
        cfg = ExperimentConfig(
            experiment_id, source_env="mountain_car", target_env="pendulum",
            source=LearnerSettings(iterations=1600, learning_rate=1e-3, discount=0.98, basis="rbf",
                                   rbf_centers=49, rbf_bandwidth=0.015, rbf_normalize=True,
                                   chunks=8, eps_decay_fraction=0.5),
            rl=ip_learner,
            apprentice=ApprenticeSettings(trials=10, steps_per_trial=100),
            alignment=AlignmentSettings(identity=False),
        )
    elif experiment_id == "cartpole_to_bicycle":
        linear = LearnerSettings(iterations=600, learning_rate=1e-3, discount=0.98, update="step",
                                 basis="linear", chunks=6, eval_episodes=5)
        cfg = ExperimentConfig(
            experiment_id, source_env="cart_pole", target_env="bicycle", seeds=tuple(range(5)),
            target_env_overrides={"max_time": 200.0},
            source=linear, rl=dataclasses.replace(linear, chunks=1, iterations=200),
            apprentice=ApprenticeSettings(trials=10, steps_per_trial=200),
            alignment=AlignmentSettings(identity=False, steps_per_trial=200),
            transfer=TransferSettings(episodes=5),
            window=5,
        )
    else:
        raise ValueError(f"unknown experiment {experiment_id!r}; known: {list(EXPERIMENTS)}")
    if scale == "paper":
        cfg = paper_scale(cfg)
    return cfg


def paper_scale(cfg):
    """Longer learning runs and the full 1000 s bicycle cap."""
    over = dict(cfg.target_env_overrides)
    if cfg.target_env == "bicycle":
        over["max_time"] = 1000.0
    return cfg.replace(
        scale="paper",
        rl=dataclasses.replace(cfg.rl, iterations=cfg.rl.iterations * 5),
        target_env_overrides=over,
    )


# -- text format ---------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _parse_scalar(text):
    """Best-effort typing for override values: bool, int, float, else string."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        v = float(t)
    except ValueError:
        return t
    return v


def _coerce(text, kind, key):
    t = text.strip()
    try:
        if kind is bool:
            low = t.lower()
            if low not in ("true", "false"):
                raise ValueError(t)
            return low == "true"
        if kind is int:
            return int(t)
        if kind is float:
            v = float(t)
            if math.isnan(v):
                raise ValueError(t)
            return v
    except ValueError:
        raise ValueError(f"bad value for {key!r}: {text!r}") from None
    return t


def emit_config(cfg):
    lines = ["[experiment]"]
    for k in _TOP:
        lines.append(f"{k} = {_fmt(getattr(cfg, k))}")
    for name in ("source_env_overrides", "target_env_overrides"):
        lines.append("")
        lines.append(f"[{name[:-len('_overrides')]}]")
        for k in sorted(getattr(cfg, name)):
            lines.append(f"{k} = {_fmt(getattr(cfg, name)[k])}")
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        lines.append("")
        lines.append(f"[{sec}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text):
    """Read a config; keys missing from the text keep the experiment defaults."""
    raw = {}
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            raw.setdefault(section, {})
            continue
        if "=" not in s or section is None:
            raise ValueError(f"line {n}: expected 'key = value' inside a [section]")
        k, v = s.split("=", 1)
        raw[section][k.strip()] = v.strip()

    top = raw.pop("experiment", {})
    if "experiment_id" not in top:
        raise ValueError("config needs experiment_id in [experiment]")
    scale = top.get("scale", "desk").strip()
    cfg = default_config(top["experiment_id"].strip(), scale if scale in SCALES else "desk")
    kw = {}
    for k, v in top.items():
        if k not in _TOP:
            raise ValueError(f"unknown key {k!r} in [experiment]")
        if k == "methods":
            kw[k] = tuple(x.strip() for x in v.split(",") if x.strip())
        elif k == "seeds":
            kw[k] = tuple(_coerce(x, int, k) for x in v.split(",") if x.strip())
        elif k in ("window", "workers"):
            kw[k] = _coerce(v, int, k)
        else:
            kw[k] = v.strip()
    for env_sec in ("source_env", "target_env"):
        if env_sec in raw:
            kw[env_sec + "_overrides"] = {k: _parse_scalar(v) for k, v in raw.pop(env_sec).items()}
    for sec in _SECTIONS:
        if sec not in raw:
            continue
        obj = getattr(cfg, sec)
        types = {f.name: type(getattr(obj, f.name)) for f in fields(obj)}
        upd = {}
        for k, v in raw.pop(sec).items():
            if k not in types:
                raise ValueError(f"unknown key {k!r} in [{sec}]")
            upd[k] = _coerce(v, types[k], k)
        kw[sec] = dataclasses.replace(obj, **upd)
    if raw:
        raise ValueError(f"unknown sections {sorted(raw)}")
    return dataclasses.replace(cfg, **kw)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_config(cfg))
