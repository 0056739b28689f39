"""Control-affine apprentice model of the target dynamics.

The apprentice predicts ``s' = W phi(s) + B a`` and is fitted by least
squares on transitions collected with a uniformly random policy.  Angular
state components are regressed on their unwrapped successor
``s + wrap(s' - s)`` so the fit never sees the +-pi seam.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .envs.base import Environment, wrap_angle
from .errors import RankDeficiencyError, TatlError
from .fqi import OneHotBasis
from .mdp import RandomPolicy, Transition, average_reward, rollout

__all__ = [
    "StateFeatures",
    "ApprenticeConfig",
    "ApprenticeModel",
    "SimulatorModel",
    "ModelErrorReport",
    "ModelEnvironment",
    "collect_random_data",
    "fit_apprentice",
    "predict",
    "utility_gap",
    "model_error_report",
    "learn_apprentice",
    "perturb",
    "default_basis",
    "dumps_apprentice",
    "loads_apprentice",
    "save_apprentice",
    "load_apprentice",
]

B_MIN = 1e-6


class StateFeatures:
    """``[s, sin(s_j), cos(s_j) for angular j, 1]``; the constant is optional."""

    kind = "state"

    def __init__(self, state_dim, angle_dims=(), bias=True):
        self.state_dim = int(state_dim)
        self.angle_dims = tuple(int(d) for d in angle_dims)
        self.bias = bool(bias)

    @property
    def dim(self):
        return self.state_dim + 2 * len(self.angle_dims) + int(self.bias)

    def features(self, states):
        s = np.atleast_2d(np.asarray(states, dtype=float))
        cols = [s]
        if self.angle_dims:
            ang = s[:, list(self.angle_dims)]
            cols += [np.sin(ang), np.cos(ang)]
        if self.bias:
            cols.append(np.ones((len(s), 1)))
        return np.hstack(cols)

    def __call__(self, state):
        return self.features(state)[0]

    def labels(self):
        out = [f"s{i}" for i in range(self.state_dim)]
        out += [f"sin(s{d})" for d in self.angle_dims] + [f"cos(s{d})" for d in self.angle_dims]
        return out + (["1"] if self.bias else [])

    def spec(self):
        angles = ",".join(map(str, self.angle_dims)) or "-"
        return f"state dim={self.state_dim} angles={angles} bias={int(self.bias)}"


def _basis_labels(basis):
    if hasattr(basis, "labels"):
        return basis.labels()
    if isinstance(basis, OneHotBasis):
        return ["cell(" + ",".join(str(int(v)) for v in c) + ")" for c in basis.centers]
    return [f"phi{i}" for i in range(basis.dim)]


def _basis_spec(basis):
    if hasattr(basis, "spec"):
        return basis.spec()
    if isinstance(basis, OneHotBasis):
        cells = " ".join(":".join(str(int(v)) for v in c) for c in basis.centers)
        return f"onehot cells={cells}"
    raise ValueError(f"cannot serialise basis of type {type(basis).__name__}")


def _parse_basis_spec(text):
    kind, _, rest = text.strip().partition(" ")
    if kind == "state":
        kv = dict(item.split("=") for item in rest.split())
        angles = () if kv["angles"] == "-" else tuple(int(v) for v in kv["angles"].split(","))
        return StateFeatures(int(kv["dim"]), angles, bool(int(kv["bias"])))
    if kind == "onehot":
        cells = rest.partition("=")[2].split()
        return OneHotBasis([[int(v) for v in c.split(":")] for c in cells])
    raise ValueError(f"unknown basis spec {text!r}")


def default_basis(env):
    """Feature map used for ``env``'s apprentice: one-hot cells for grids,
    state plus trigonometric angle features otherwise."""
    if hasattr(env, "free_cells"):
        return OneHotBasis(env.free_cells)
    return StateFeatures(env.state_dim, getattr(env, "angle_dims", ()))


@dataclass
class ApprenticeConfig:
    trials: int = 10
    steps_per_trial: int = 100
    utility_gap_tol: float = 1.0
    max_refits: int = 5

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.steps_per_trial < 1:
            raise ValueError("steps_per_trial must be >= 1")
        if not self.utility_gap_tol > 0:
            raise ValueError("utility_gap_tol must be positive")
        if self.max_refits < 0:
            raise ValueError("max_refits must be >= 0")


@dataclass
class ApprenticeModel:
    W_hat: np.ndarray
    B_hat: np.ndarray
    basis: object
    angle_dims: tuple = ()
    actuated_dim: int | None = None
    residual_norm: float = 0.0

    def __post_init__(self):
        self.W_hat = np.atleast_2d(np.asarray(self.W_hat, dtype=float))
        self.B_hat = np.asarray(self.B_hat, dtype=float)
        if self.B_hat.ndim == 1:
            self.B_hat = self.B_hat[:, None]

    @property
    def state_dim(self):
        return self.W_hat.shape[0]

    @property
    def gain(self):
        """Control gain in the actuated row (scalar actions only)."""
        row = 0 if self.actuated_dim is None else self.actuated_dim
        return float(self.B_hat[row, 0])

    def predict(self, state, action_value):
        a = np.atleast_1d(np.asarray(action_value, dtype=float))
        return self.W_hat @ self.basis(np.asarray(state, dtype=float)) + self.B_hat @ a

    def predict_batch(self, states, action_values):
        a = np.asarray(action_values, dtype=float).reshape(len(states), -1)
        return self.basis.features(states) @ self.W_hat.T + a @ self.B_hat.T

    def check_gain(self, b_min=B_MIN):
        if not abs(self.gain) > b_min:
            raise TatlError(f"apprentice control gain {self.gain:.3g} is below b_min={b_min}; "
                            "the correction gain 1/B is undefined")

    def fingerprint(self):
        return hash(self.W_hat.tobytes() + self.B_hat.tobytes())


class SimulatorModel:
    """Apprentice stand-in backed by a known simulator (test fixtures and oracles).

    ``gain`` is the exact control gain of the actuated row, measured by a
    unit finite difference of the simulator at ``reference_state``.
    """

    def __init__(self, env, reference_state=None):
        self.env = env
        self.angle_dims = tuple(getattr(env, "angle_dims", ()))
        self.actuated_dim = env.actuated_dim
        self.B_hat = None
        if env.continuous_actuation:
            ref = np.zeros(env.state_dim) if reference_state is None else np.asarray(reference_state, float)
            d = env.state_difference(env.simulate(ref, [1.0]), env.simulate(ref, [0.0]))
            self.B_hat = d[:, None]

    @property
    def gain(self):
        if self.B_hat is None:
            raise TatlError("discrete-only simulator has no scalar control gain")
        return float(self.B_hat[self.actuated_dim, 0])

    def predict(self, state, action_value):
        return self.env.simulate(state, action_value)

    def check_gain(self, b_min=B_MIN):
        if not abs(self.gain) > b_min:
            raise TatlError(f"simulator control gain {self.gain:.3g} is below b_min={b_min}")

    def fingerprint(self):
        return id(self.env)


def predict(m, s, action_value):
    return m.predict(s, action_value)


# -- data ---------------------------------------------------------------------

def collect_random_data(env, cfg, seed, first_trial=0):
    """``cfg.trials`` uniform-random rollouts of at most ``cfg.steps_per_trial`` steps.

    Trial ``j`` is seeded from ``(seed, j)`` so extending a dataset with more
    trials reproduces the existing ones exactly.
    """
    n = env.action_set.cardinality
    runs = [rollout(env, RandomPolicy(n), cfg.steps_per_trial,
                    _rng.child_seed(seed, "apprentice-trial", j))
            for j in range(first_trial, first_trial + cfg.trials)]
    return _with_values(env, runs)


def _with_values(env, trajs):
    """Transitions of ``trajs`` with ``action_value`` filled in where missing."""
    out = []
    for traj in trajs:
        for t in traj.transitions:
            if t.action_value is None:
                t = t._replace(action_value=env.action_set.value(t.action_index))
            out.append(t)
    return out


def _design(data, basis, angle_dims):
    S = np.array([t.state for t in data], dtype=float)
    S1 = np.array([t.next_state for t in data], dtype=float)
    A = []
    for t in data:
        if t.action_value is None:
            raise ValueError("transitions need action_value to fit an apprentice")
        A.append(np.atleast_1d(t.action_value))
    A = np.array(A, dtype=float)
    Y = S1.copy()
    if angle_dims:
        idx = list(angle_dims)
        Y[:, idx] = S[:, idx] + wrap_angle(S1[:, idx] - S[:, idx])
    return np.hstack([basis.features(S), A]), Y, A.shape[1]


def fit_apprentice(data, basis, angle_dims=(), actuated_dim=None):
    """Least-squares fit of ``[W, B]`` minimising ``sum ||s' - W phi(s) - B a||^2``."""
    if len(data) == 0:
        raise ValueError("no transitions to fit")
    X, Y, adim = _design(data, basis, angle_dims)
    if len(X) < X.shape[1]:
        raise ValueError(f"need at least {X.shape[1]} transitions, got {len(X)}")
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1.0):
        v = vt[-1]
        labels = _basis_labels(basis) + [f"a{i}" for i in range(adim)]
        j = int(np.argmax(np.abs(v)))
        raise RankDeficiencyError(
            f"design matrix is rank deficient; unexcited direction dominated by {labels[j]!r}",
            direction=v)
    theta, res, _, _ = np.linalg.lstsq(X, Y, rcond=None)
    resid = float(np.linalg.norm(Y - X @ theta))
    W = theta[:-adim].T
    B = theta[-adim:].T
    return ApprenticeModel(W, B, basis, tuple(angle_dims), actuated_dim, resid)


@dataclass
class ModelErrorReport:
    sup_error: float
    mean_error: float
    alpha_estimate: float | None = None


def model_error_report(m, holdout, true_B=None):
    if len(holdout) == 0:
        raise ValueError("holdout set is empty")
    errs = []
    for t in holdout:
        a = t.action_value
        d = np.asarray(t.next_state, float) - m.predict(t.state, a)
        if m.angle_dims:
            d[list(m.angle_dims)] = wrap_angle(d[list(m.angle_dims)])
        errs.append(np.linalg.norm(d))
    errs = np.array(errs)
    alpha = None
    if true_B is not None:
        tb = np.asarray(true_B, dtype=float)
        tb = tb[:, None] if tb.ndim == 1 else tb
        row = 0 if m.actuated_dim is None else m.actuated_dim
        alpha = float(tb[row, 0] / m.B_hat[row, 0])
    sup = float(errs.max())
    return ModelErrorReport(sup, min(float(errs.mean()), sup), alpha)


# -- utility gap and Algorithm-2 loop ------------------------------------------

class ModelEnvironment(Environment):
    """The true task with its dynamics replaced by an apprentice prediction.

    Rewards and termination come from the wrapped task, so the two can be
    compared on identical seeds.  Predictions are projected onto the task's
    state box, as the true dynamics are.
    """

    def __init__(self, env, model):
        super().__init__(env.action_set, env.state_low, env.state_high,
                         env.horizon, env.discount, env.reward_bound)
        self.inner = env.copy()
        self.model = model
        self.name = env.name
        self.angle_dims = env.angle_dims
        self.actuated_dim = env.actuated_dim
        self.continuous_actuation = env.continuous_actuation

    def initial_state(self, rng):
        return self.inner.initial_state(rng)

    def _dynamics(self, state, action_value, noise):
        nxt = np.array(self.model.predict(state, action_value), dtype=float)
        if hasattr(self.inner, "free_cells"):
            nxt = np.round(nxt)
        if self.angle_dims:
            nxt[list(self.angle_dims)] = wrap_angle(nxt[list(self.angle_dims)])
        # the true task never leaves its state box, so neither may the model
        return np.clip(nxt, self.state_low, self.state_high)

    def _sync(self):
        self.inner.t = self.t
        self.inner.state = self.state

    def is_terminal(self, next_state):
        self._sync()
        return self.inner.is_terminal(next_state)

    def reward(self, state, action_value, next_state, terminal):
        if hasattr(self.inner, "free_cells"):
            return 10.0 if terminal else 0.0
        self._sync()
        return self.inner.reward(state, action_value, next_state, terminal)


def utility_gap(policy, env_true, model, k, seed, return_runs=False):
    """``|U(true) - U(model)|`` of ``policy`` over ``k`` seeded trials.

    With ``return_runs`` also returns the true-environment trajectories the
    check consumed.
    """
    menv = ModelEnvironment(env_true, model)
    seeds = [_rng.child_seed(seed, "utility-gap", j) for j in range(k)]
    true_runs = [rollout(env_true, policy, env_true.horizon, s) for s in seeds]
    model_runs = [rollout(menv, policy, env_true.horizon, s) for s in seeds]
    gap = abs(average_reward(true_runs) - average_reward(model_runs))
    if return_runs:
        return gap, true_runs
    return gap


@dataclass
class ApprenticeResult:
    model: ApprenticeModel
    data: list
    gaps: list = field(default_factory=list)

    @property
    def samples(self):
        """Target-environment transitions consumed, which is the dataset size."""
        return len(self.data)


def learn_apprentice(env, cfg, seed, basis=None, policy=None, gap_trials=None):
    """Collect random data, fit, and refit with twice the data while the
    utility gap of ``policy`` exceeds ``cfg.utility_gap_tol``.

    The true-environment rollouts of each gap check join the dataset, so
    every target transition spent is in ``result.data``.

    Without a ``policy`` the first successful fit is returned.  Each refit
    adds ``cfg.trials`` new trials of twice the previous length; a rank
    deficient fit adds trials of the same length instead, since what it
    lacks is coverage of the state space.
    """
    basis = default_basis(env) if basis is None else basis
    angle_dims = tuple(getattr(env, "angle_dims", ()))
    steps = cfg.steps_per_trial
    data = collect_random_data(env, cfg, seed)
    trial = cfg.trials
    gaps = []
    model = None
    for attempt in range(cfg.max_refits + 1):
        try:
            model = fit_apprentice(data, basis, angle_dims, env.actuated_dim)
        except (RankDeficiencyError, ValueError):
            if attempt == cfg.max_refits:
                raise
            model = None
        if model is not None:
            if policy is None:
                break
            gap, runs = utility_gap(policy, env, model, gap_trials or cfg.trials,
                                    _rng.child_seed(seed, "gap-check", attempt), return_runs=True)
            gaps.append(gap)
            data = data + _with_values(env, runs)
            if gap <= cfg.utility_gap_tol:
                break
        if attempt == cfg.max_refits:
            break
        if model is not None:
            steps *= 2
        more = ApprenticeConfig(cfg.trials, steps, cfg.utility_gap_tol, cfg.max_refits)
        data = data + collect_random_data(env, more, seed, first_trial=trial)
        trial += cfg.trials
    return ApprenticeResult(model, data, gaps)


def _persistence(m):
    """Coefficients of the model ``s' = s`` in ``W`` (zero for non-state bases)."""
    E = np.zeros_like(m.W_hat)
    if isinstance(m.basis, StateFeatures):
        E[:, :m.state_dim] = np.eye(m.state_dim)
    return E


def perturb(m, delta, seed):
    """Copy of ``m`` with relative parameter error ``delta``.

    The per-step increment part of ``W`` (``W`` minus the persistence
    model ``s' = s``) and ``B`` are scaled elementwise by
    ``1 + delta * xi`` with ``xi`` standard normal drawn from ``seed``.
    """
    g = _rng.stream(seed, "apprentice-perturbation")
    xw = g.standard_normal(m.W_hat.shape)
    xb = g.standard_normal(m.B_hat.shape)
    E = _persistence(m)
    W = E + (m.W_hat - E) * (1.0 + delta * xw)
    return ApprenticeModel(W, m.B_hat * (1.0 + delta * xb),
                           m.basis, m.angle_dims, m.actuated_dim, m.residual_norm)


# -- serialization --------------------------------------------------------------

def _rows(a):
    return [" ".join(repr(float(v)) for v in r) for r in np.atleast_2d(a)]


def dumps_apprentice(m):
    lines = ["W_HAT", *_rows(m.W_hat), "B_HAT", *_rows(m.B_hat), "BASIS_SPEC", _basis_spec(m.basis)]
    lines += ["ANGLE_DIMS", " ".join(map(str, m.angle_dims)) or "-"]
    lines += ["ACTUATED_DIM", "-" if m.actuated_dim is None else str(m.actuated_dim)]
    return "\n".join(lines) + "\n"


def loads_apprentice(text):
    blocks, name = {}, None
    for ln in text.splitlines():
        if ln in ("W_HAT", "B_HAT", "BASIS_SPEC", "ANGLE_DIMS", "ACTUATED_DIM"):
            name = ln
            blocks[name] = []
        elif name is not None and ln.strip():
            blocks[name].append(ln)
    W = np.array([[float(v) for v in r.split()] for r in blocks["W_HAT"]])
    B = np.array([[float(v) for v in r.split()] for r in blocks["B_HAT"]])
    basis = _parse_basis_spec(blocks["BASIS_SPEC"][0])
    ang = blocks.get("ANGLE_DIMS", ["-"])[0]
    act = blocks.get("ACTUATED_DIM", ["-"])[0]
    return ApprenticeModel(W, B, basis, () if ang == "-" else tuple(int(v) for v in ang.split()),
                           None if act == "-" else int(act))


def save_apprentice(m, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_apprentice(m))


def load_apprentice(path):
    with open(path, encoding="utf-8") as fh:
        return loads_apprentice(fh.read())
