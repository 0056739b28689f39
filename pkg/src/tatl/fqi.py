"""Fitted Q-iteration with a linear-in-basis action-value function.

``Q(s, a) = w[:, a] . xi(s)``.  Training is a semi-gradient step on the
one-step Bellman residual::

    w[:, a] += lr * (r + gamma * max_b Q(s', b) - Q(s, a)) * xi(s)

applied either to transitions gathered online with epsilon-greedy
exploration, or repeatedly to a fixed replay dataset.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as _rng
from .errors import NumericalFault
from .mdp import Policy

__all__ = [
    "RbfBasis",
    "LinearBasis",
    "OneHotBasis",
    "rbf_lattice",
    "lattice_counts",
    "basis_eval",
    "LinearQ",
    "FqiConfig",
    "LearningCurve",
    "greedy_action",
    "epsilon_greedy",
    "GreedyPolicy",
    "fqi_train",
    "save_q",
    "load_q",
    "dumps_q",
    "loads_q",
]


class RbfBasis:
    """Gaussian radial basis ``exp(-0.5 (s-c)^T Sigma^-1 (s-c))`` per center.

    ``scale`` (optional, per dimension) divides ``s - offset`` before the
    kernel is applied, so centers and ``bandwidth`` live in the scaled
    coordinates.
    """

    kind = "rbf"

    def __init__(self, centers, bandwidth, includes_bias=False, offset=None, scale=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        dim = self.centers.shape[1]
        bw = np.asarray(bandwidth, dtype=float)
        if bw.ndim == 0:
            bw = bw * np.eye(dim)
        elif bw.ndim == 1:
            bw = np.diag(bw)
        if bw.shape != (dim, dim):
            raise ValueError(f"bandwidth must be {dim}x{dim}, got {bw.shape}")
        if not np.allclose(bw, bw.T):
            raise ValueError("bandwidth matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(bw)
        except np.linalg.LinAlgError:
            raise ValueError("bandwidth matrix is not positive definite") from None
        self.bandwidth = bw
        # rows of centers / states are whitened by L^-1 so the kernel is a plain norm
        self._whiten = np.linalg.inv(chol)
        self._wc = self.centers @ self._whiten.T
        self.includes_bias = bool(includes_bias)
        self.offset = np.zeros(dim) if offset is None else np.asarray(offset, dtype=float)
        self.scale = np.ones(dim) if scale is None else np.asarray(scale, dtype=float)

    @property
    def state_dim(self):
        return self.centers.shape[1]

    @property
    def dim(self):
        return len(self.centers) + int(self.includes_bias)

    def features(self, states):
        """Feature matrix, one row per state."""
        s = (np.atleast_2d(np.asarray(states, dtype=float)) - self.offset) / self.scale
        ws = s @ self._whiten.T
        d2 = (ws * ws).sum(1)[:, None] - 2.0 * ws @ self._wc.T + (self._wc * self._wc).sum(1)[None, :]
        f = np.exp(-0.5 * np.maximum(d2, 0.0))
        if self.includes_bias:
            f = np.hstack([f, np.ones((len(f), 1))])
        return f

    def __call__(self, state):
        s = np.asarray(state, dtype=float)
        if s.shape != (self.state_dim,):
            raise ValueError(f"state has shape {s.shape}, basis expects ({self.state_dim},)")
        d = self._wc - self._whiten @ ((s - self.offset) / self.scale)
        f = np.exp(-0.5 * (d * d).sum(1))
        if self.includes_bias:
            f = np.append(f, 1.0)
        return f


class LinearBasis:
    """Raw state as features, optionally with a constant."""

    kind = "linear"

    def __init__(self, state_dim, includes_bias=False):
        self.state_dim = int(state_dim)
        self.includes_bias = bool(includes_bias)

    @property
    def dim(self):
        return self.state_dim + int(self.includes_bias)

    def features(self, states):
        s = np.atleast_2d(np.asarray(states, dtype=float))
        if self.includes_bias:
            s = np.hstack([s, np.ones((len(s), 1))])
        return s

    def __call__(self, state):
        s = np.asarray(state, dtype=float)
        if s.shape != (self.state_dim,):
            raise ValueError(f"state has shape {s.shape}, basis expects ({self.state_dim},)")
        return np.append(s, 1.0) if self.includes_bias else s.copy()


class OneHotBasis:
    """Indicator of a discrete cell; cells outside ``cells`` map to zeros."""

    kind = "onehot"

    def __init__(self, cells):
        self.centers = np.array(cells, dtype=float)
        self.index = {tuple(int(v) for v in c): i for i, c in enumerate(self.centers)}
        self.includes_bias = False

    @property
    def state_dim(self):
        return self.centers.shape[1]

    @property
    def dim(self):
        return len(self.centers)

    def _idx(self, state):
        return self.index.get(tuple(int(round(v)) for v in state))

    def features(self, states):
        states = np.atleast_2d(states)
        f = np.zeros((len(states), self.dim))
        for k, s in enumerate(states):
            i = self._idx(s)
            if i is not None:
                f[k, i] = 1.0
        return f

    def __call__(self, state):
        f = np.zeros(self.dim)
        i = self._idx(state)
        if i is not None:
            f[i] = 1.0
        return f


def basis_eval(basis, state):
    return basis(state)


def lattice_counts(n_centers, dim):
    """Per-dimension counts whose product is close to ``n_centers``."""
    if dim == 1:
        return (n_centers,)
    best = None
    for counts in itertools.product(range(1, n_centers + 1), repeat=dim):
        prod = math.prod(counts)
        key = (abs(prod - n_centers), max(counts) - min(counts), counts)
        if best is None or key < best:
            best = key
    return best[2]


def rbf_lattice(low, high, n_centers, bandwidth, includes_bias=False, normalize=False):
    """RBF basis with centers on a uniform lattice over the box ``[low, high]``.

    With ``normalize`` the box is mapped to the unit cube before the kernel
    is applied (centers and ``bandwidth`` are then in unit-cube coordinates).
    """
    low, high = np.asarray(low, dtype=float), np.asarray(high, dtype=float)
    counts = lattice_counts(n_centers, len(low))
    if normalize:
        axes = [np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5]) for n in counts]
        offset, scale = low, high - low
    else:
        axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2])
                for lo, hi, n in zip(low, high, counts)]
        offset, scale = None, None
    centers = np.array(list(itertools.product(*axes)))
    return RbfBasis(centers, bandwidth, includes_bias=includes_bias, offset=offset, scale=scale)


class LinearQ:
    """Action-value function linear in the basis features."""

    def __init__(self, basis, n_actions, weights=None, learning_rate=1e-3):
        self.basis = basis
        self.n_actions = int(n_actions)
        if weights is None:
            weights = np.zeros((basis.dim, self.n_actions))
        self.weights = np.array(weights, dtype=float)
        if self.weights.shape != (basis.dim, self.n_actions):
            raise ValueError(f"weights must have shape {(basis.dim, self.n_actions)}, got {self.weights.shape}")
        self.learning_rate = float(learning_rate)

    def values(self, state):
        return self.basis(state) @ self.weights

    def values_batch(self, states):
        return self.basis.features(states) @ self.weights

    def __call__(self, state, action=None):
        q = self.values(state)
        return q if action is None else float(q[action])

    def copy(self):
        return LinearQ(self.basis, self.n_actions, self.weights.copy(), self.learning_rate)

    def fingerprint(self):
        return hash(self.weights.tobytes())


def greedy_action(q, state):
    """``argmax_a Q(s, a)``; ties go to the lowest index."""
    return int(np.argmax(q.values(state)))


def epsilon_greedy(q, state, eps, rng):
    """Uniform action with probability ``eps``, else greedy.

    ``rng`` is a ``np.random.Generator`` or an integer seed.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if not isinstance(rng, np.random.Generator):
        rng = _rng.stream(rng, "epsilon-greedy")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(q.n_actions))
    return greedy_action(q, state)


class GreedyPolicy(Policy):
    def __init__(self, q):
        self.q = q

    def __call__(self, state):
        return greedy_action(self.q, state)


@dataclass
class FqiConfig:
    iterations: int = 200
    learning_rate: float = 1e-3
    discount: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    # fraction of the iterations over which eps is annealed linearly
    eps_decay_fraction: float = 0.5
    # "episode": one batched update per episode; "step": update after every transition
    update: str = "episode"
    max_steps: Optional[int] = None
    # total target-sample budget; stops online training early once spent
    sample_budget: Optional[int] = None
    divergence_threshold: float = 1e6
    # batch mode stops when no weight moves by more than this
    tol: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.update not in ("episode", "step"):
            raise ValueError(f"unknown update mode {self.update!r}")

    def epsilon(self, iteration):
        span = max(1, int(round(self.eps_decay_fraction * self.iterations)))
        frac = min(1.0, iteration / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)


@dataclass
class LearningCurve:
    """Per-episode record: cumulative target samples and episode reward."""

    samples: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def append(self, cumulative_samples, episode_reward):
        self.samples.append(int(cumulative_samples))
        self.rewards.append(float(episode_reward))

    def extend(self, other, sample_offset=0):
        for s, r in zip(other.samples, other.rewards):
            self.append(s + sample_offset, r)

    def __len__(self):
        return len(self.samples)

    @property
    def total_samples(self):
        return self.samples[-1] if self.samples else 0

    def windowed(self, window=50):
        """Trailing moving average of the episode rewards."""
        r = np.asarray(self.rewards, dtype=float)
        if len(r) == 0:
            return r
        c = np.cumsum(np.insert(r, 0, 0.0))
        idx = np.arange(1, len(r) + 1)
        lo = np.maximum(0, idx - window)
        return (c[idx] - c[lo]) / (idx - lo)

    def final_average(self, window=50):
        w = self.windowed(window)
        return float(w[-1]) if len(w) else float("nan")


def _check_divergence(w, threshold, where):
    m = float(np.max(np.abs(w))) if w.size else 0.0
    if not math.isfinite(m) or m > threshold:
        raise NumericalFault(f"Q weights diverged (max |w| = {m:.3g}) during {where}")


def _fit_dataset(q, dataset, cfg):
    states = np.array([t.state for t in dataset])
    nexts = np.array([t.next_state for t in dataset])
    acts = np.array([t.action_index for t in dataset], dtype=int)
    rews = np.array([t.reward for t in dataset], dtype=float)
    cont = np.array([0.0 if t.terminal else 1.0 for t in dataset])
    phi = q.basis.features(states)
    phi_next = q.basis.features(nexts)
    onehot = np.zeros((len(acts), q.n_actions))
    onehot[np.arange(len(acts)), acts] = 1.0
    w = q.weights
    for it in range(cfg.iterations):
        target = rews + cfg.discount * cont * (phi_next @ w).max(1)
        delta = target - (phi @ w)[np.arange(len(acts)), acts]
        step = cfg.learning_rate * (phi.T @ (onehot * delta[:, None]))
        w = w + step
        _check_divergence(w, cfg.divergence_threshold, f"batch iteration {it}")
        if np.max(np.abs(step)) <= cfg.tol:
            break
    q.weights = w
    return it + 1


def fqi_train(env, cfg, q, seed, dataset=None):
    """Train a copy of ``q``; returns ``(trained_q, LearningCurve)``.

    With ``dataset`` (a list of transitions) the Bellman update is iterated
    ``cfg.iterations`` times over that fixed batch and the curve is empty.
    Otherwise each iteration is one epsilon-greedy episode in ``env``.
    """
    if env is not None and env.action_set.cardinality != q.n_actions:
        raise ValueError(
            f"environment has {env.action_set.cardinality} actions, Q has {q.n_actions} columns")
    q = q.copy()
    q.learning_rate = cfg.learning_rate
    curve = LearningCurve()
    if dataset is not None:
        _fit_dataset(q, dataset, cfg)
        return q, curve

    explore = _rng.stream(seed, "fqi", "explore")
    max_steps = cfg.max_steps or env.horizon
    lr, gamma = cfg.learning_rate, cfg.discount
    w = q.weights
    samples = 0
    for episode in range(cfg.iterations):
        eps = cfg.epsilon(episode)
        state = env.reset(seed=_rng.child_seed(seed, "fqi", "episode", episode))
        phi = q.basis(state)
        grad = np.zeros_like(w) if cfg.update == "episode" else None
        total = 0.0
        # Q-values as lists: max and first-max index are cheaper than numpy calls on 3 items
        qs = (phi @ w).tolist()
        for _ in range(max_steps):
            if explore.random() < eps:
                a = int(explore.integers(q.n_actions))
            else:
                a = qs.index(max(qs))
            nxt, r, terminal = env.step(a)
            samples += 1
            total += r
            phi_next = q.basis(nxt)
            qs_next = (phi_next @ w).tolist()
            target = r if terminal else r + gamma * max(qs_next)
            delta = target - qs[a]
            if grad is None:
                w[:, a] += lr * delta * phi
                # the weights moved, so the successor values are stale
                qs_next = (phi_next @ w).tolist()
            else:
                grad[:, a] += delta * phi
            phi, qs = phi_next, qs_next
            if terminal or (cfg.sample_budget is not None and samples >= cfg.sample_budget):
                break
        if grad is not None:
            w += lr * grad
        _check_divergence(w, cfg.divergence_threshold, f"episode {episode}")
        curve.append(samples, total)
        if cfg.sample_budget is not None and samples >= cfg.sample_budget:
            break
    q.weights = w
    return q, curve


# -- serialization -----------------------------------------------------------

def _row(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def dumps_q(q):
    """Plain-text form: header ``basis_type,dim,actions``, centers, weights.

    RBF bases add labelled bandwidth / normalization blocks between the
    centers and the weights.
    """
    b = q.basis
    lines = [f"{b.kind},{b.dim},{q.n_actions}"]
    if b.kind == "linear":
        lines.append(f"# linear state_dim={b.state_dim} bias={int(b.includes_bias)}")
    else:
        lines.append(f"# centers {len(b.centers)} bias={int(b.includes_bias)}")
        lines.extend(_row(c) for c in b.centers)
    if b.kind == "rbf":
        lines.append("# bandwidth")
        lines.extend(_row(r) for r in b.bandwidth)
        lines.append("# offset")
        lines.append(_row(b.offset))
        lines.append("# scale")
        lines.append(_row(b.scale))
    lines.append(f"# weights lr={q.learning_rate!r}")
    lines.extend(_row(r) for r in q.weights)
    return "\n".join(lines) + "\n"


def loads_q(text):
    lines = text.strip("\n").splitlines()
    kind, dim, n_actions = lines[0].split(",")
    dim, n_actions = int(dim), int(n_actions)
    blocks, name, cur = {}, None, []
    for ln in lines[1:]:
        if ln.startswith("#"):
            if name is not None:
                blocks[name] = cur
            parts = ln[1:].split()
            name, cur = parts[0], []
            blocks[name + "_meta"] = dict(p.split("=") for p in parts[1:] if "=" in p)
        else:
            cur.append([float(x) for x in ln.split()])
    blocks[name] = cur
    if kind == "linear":
        meta = blocks["linear_meta"]
        basis = LinearBasis(int(meta["state_dim"]), includes_bias=bool(int(meta["bias"])))
    elif kind == "onehot":
        basis = OneHotBasis(blocks["centers"])
    elif kind == "rbf":
        basis = RbfBasis(blocks["centers"], np.array(blocks["bandwidth"]),
                         includes_bias=bool(int(blocks["centers_meta"]["bias"])),
                         offset=blocks["offset"][0], scale=blocks["scale"][0])
    else:
        raise ValueError(f"unknown basis type {kind!r}")
    if basis.dim != dim:
        raise ValueError(f"header says dim {dim}, basis has {basis.dim}")
    lr = float(blocks["weights_meta"].get("lr", 1e-3))
    return LinearQ(basis, n_actions, np.array(blocks["weights"]).reshape(dim, n_actions), lr)


def save_q(q, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_q(q))


def load_q(path):
    with open(path, encoding="utf-8") as fh:
        return loads_q(fh.read())
