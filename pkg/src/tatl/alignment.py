"""Inter-task state mapping learned from unpaired state samples.

Each domain is z-normalised, a k-nearest-neighbour graph Laplacian is built
on it, and the generalised eigenproblem ``X^T L X a = lam X^T D X a`` gives
linear projections onto the smoothest directions of that domain's data
(locality preserving projections).  Latent coordinates are scaled to unit
variance and signed so their skewness is positive; two domains whose data
differ by an invertible linear map then land on the same latent
coordinates.  Least-squares lifts from latent space back to each domain
complete the forward (source -> target) and inverse (target -> source) maps.

Angular coordinates are handled in a chart whose cut sits opposite the
circular mean of the data, so a cloud of samples around +-pi is not split
in two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from .errors import ActionCardinalityError, RankDeficiencyError

__all__ = [
    "AlignmentDataset",
    "InterTaskMap",
    "fit_alignment",
    "map_state",
    "unmap_state",
    "map_action",
    "dumps_map",
    "loads_map",
    "save_map",
    "load_map",
]

TWO_PI = 2.0 * np.pi


@dataclass
class AlignmentDataset:
    source_states: np.ndarray
    target_states: np.ndarray
    source_angle_dims: tuple = ()
    target_angle_dims: tuple = ()

    def __post_init__(self):
        self.source_states = np.atleast_2d(np.asarray(self.source_states, dtype=float))
        self.target_states = np.atleast_2d(np.asarray(self.target_states, dtype=float))
        if self.source_states.size == 0 or self.target_states.size == 0:
            raise ValueError("alignment needs non-empty source and target samples")

    @classmethod
    def from_transitions(cls, source_data, target_data, source_env=None, target_env=None):
        """Build from transition lists (states and next states both used)."""
        def states(data):
            return np.array([t.state for t in data] + [t.next_state for t in data])
        return cls(states(source_data), states(target_data),
                   tuple(getattr(source_env, "angle_dims", ())),
                   tuple(getattr(target_env, "angle_dims", ())))


def _chart_cuts(x, angle_dims):
    """Start of the ``[cut, cut + 2 pi)`` chart for each angular column."""
    cuts = {}
    for d in angle_dims:
        mean = np.arctan2(np.sin(x[:, d]).mean(), np.cos(x[:, d]).mean())
        cuts[d] = float(mean - np.pi)
    return cuts


def _to_chart(x, cuts):
    if not cuts:
        return x
    x = np.array(x, dtype=float, copy=True)
    for d, cut in cuts.items():
        x[..., d] = cut + np.mod(x[..., d] - cut, TWO_PI)
    return x


def _from_chart(x, cuts):
    if not cuts:
        return x
    x = np.array(x, dtype=float, copy=True)
    for d in cuts:
        x[..., d] = np.mod(x[..., d] + np.pi, TWO_PI) - np.pi
    return x


@dataclass
class InterTaskMap:
    """Affine maps between source and target state spaces.

    ``forward`` (source -> target): ``t = forward_A @ s + forward_b``;
    ``inverse`` (target -> source): ``s = inverse_A @ t + inverse_b``.  Both
    act in angle charts given by ``source_cuts`` / ``target_cuts``.
    """

    forward_A: np.ndarray
    forward_b: np.ndarray
    inverse_A: np.ndarray
    inverse_b: np.ndarray
    norm_mean: tuple = (None, None)
    norm_scale: tuple = (None, None)
    source_cuts: dict = field(default_factory=dict)
    target_cuts: dict = field(default_factory=dict)
    round_trip_tol: float = 0.0

    @classmethod
    def identity(cls, dim):
        eye, zero = np.eye(dim), np.zeros(dim)
        return cls(eye, zero.copy(), eye.copy(), zero.copy(),
                   norm_mean=(zero.copy(), zero.copy()), norm_scale=(np.ones(dim), np.ones(dim)))

    def __post_init__(self):
        # checked once; maps are not mutated after construction
        d = self.forward_A.shape
        self._identity = bool(
            d[0] == d[1] and not self.source_cuts and not self.target_cuts
            and np.array_equal(self.forward_A, np.eye(d[0])) and not np.any(self.forward_b)
            and np.array_equal(self.inverse_A, np.eye(d[0])) and not np.any(self.inverse_b))

    @property
    def is_identity(self):
        return self._identity

    @property
    def source_dim(self):
        return self.forward_A.shape[1]

    @property
    def target_dim(self):
        return self.forward_A.shape[0]

    def to_source(self, target_states):
        if self.is_identity:
            return np.array(target_states, dtype=float)
        t = _to_chart(np.asarray(target_states, dtype=float), self.target_cuts)
        return _from_chart(t @ self.inverse_A.T + self.inverse_b, self.source_cuts)

    def to_target(self, source_states):
        if self.is_identity:
            return np.array(source_states, dtype=float)
        s = _to_chart(np.asarray(source_states, dtype=float), self.source_cuts)
        return _from_chart(s @ self.forward_A.T + self.forward_b, self.target_cuts)

    def round_trip_error(self, source_states):
        """Max normalised error of ``inverse(forward(s))`` over the given states."""
        s = np.atleast_2d(source_states)
        back = self.to_source(self.to_target(s))
        diff = _to_chart(back, self.source_cuts) - _to_chart(s, self.source_cuts)
        for d in self.source_cuts:
            diff[:, d] = np.mod(diff[:, d] + np.pi, TWO_PI) - np.pi
        scale = self.norm_scale[0] if self.norm_scale[0] is not None else 1.0
        return float(np.max(np.abs(diff / scale)))


def map_state(m, s_target):
    """Target -> source (the inverse mapping)."""
    if len(s_target) != m.target_dim:
        raise ValueError(f"target state has dim {len(s_target)}, map expects {m.target_dim}")
    return m.to_source(s_target)


def unmap_state(m, s_source):
    """Source -> target (the forward mapping)."""
    if len(s_source) != m.source_dim:
        raise ValueError(f"source state has dim {len(s_source)}, map expects {m.source_dim}")
    return m.to_target(s_source)


def map_action(source_action_index, source_set, target_set):
    """Ordinal correspondence between equal-cardinality action sets."""
    if source_set.cardinality != target_set.cardinality:
        raise ActionCardinalityError(
            f"action sets differ in cardinality ({source_set.cardinality} vs "
            f"{target_set.cardinality}); transfer needs |A_S| = |A_T|")
    if not 0 <= source_action_index < source_set.cardinality:
        raise IndexError(f"action index {source_action_index} out of range")
    return int(source_action_index)


# -- fitting -----------------------------------------------------------------

def _normalise(x, label):
    mean = x.mean(0)
    scale = x.std(0)
    for d, sd in enumerate(scale):
        if not sd > 1e-12 * max(1.0, abs(mean[d])):
            raise RankDeficiencyError(f"{label} dimension {d} has no variance", direction=d)
    z = (x - mean) / scale
    evals, evecs = np.linalg.eigh(np.cov(z, rowvar=False).reshape(z.shape[1], z.shape[1]))
    if evals[0] < 1e-10:
        v = evecs[:, 0]
        d = int(np.argmax(np.abs(v)))
        raise RankDeficiencyError(
            f"{label} covariance is rank deficient along {np.round(v, 3).tolist()} "
            f"(dominated by dimension {d})", direction=v)
    return z, mean, scale


def _laplacian_projection(z, knn, latent_dim):
    n = len(z)
    k = min(knn, n - 1)
    tree = cKDTree(z)
    dist, idx = tree.query(z, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]
    sigma2 = np.median(dist[:, -1]) ** 2 or 1.0
    rows = np.repeat(np.arange(n), k)
    w = np.exp(-dist.ravel() ** 2 / sigma2)
    W = np.zeros((n, n))
    W[rows, idx.ravel()] = w
    W = np.maximum(W, W.T)
    deg = W.sum(1)
    L = np.diag(deg) - W
    A = z.T @ L @ z
    B = z.T @ (deg[:, None] * z)
    evals, evecs = linalg.eigh((A + A.T) / 2, (B + B.T) / 2)
    P = evecs[:, :latent_dim]
    lat = z @ P
    P = P / lat.std(0)
    lat = z @ P
    skew = (lat ** 3).mean(0)
    for j in range(latent_dim):
        s = skew[j]
        if abs(s) < 1e-8:
            nz = np.flatnonzero(np.abs(P[:, j]) > 1e-12)
            s = P[nz[0], j] if len(nz) else 1.0
        if s < 0:
            P[:, j] = -P[:, j]
    return P, evals[:latent_dim]


def _subsample(x, max_points):
    if len(x) <= max_points:
        return x
    idx = np.linspace(0, len(x) - 1, max_points).round().astype(int)
    return x[idx]


def fit_alignment(data, knn=10, latent_dim=None, round_trip_bound=0.1, max_points=1500):
    """Fit an :class:`InterTaskMap` from unpaired source/target samples.

    Deterministic for fixed datasets.  Raises :class:`RankDeficiencyError` if
    either domain's normalised covariance is singular, and ``ValueError`` if
    the achieved round-trip error exceeds ``round_trip_bound`` (normalised
    units).
    """
    if knn < 1:
        raise ValueError("knn must be >= 1")
    xs, xt = data.source_states, data.target_states
    ds, dt = xs.shape[1], xt.shape[1]
    if latent_dim is None:
        latent_dim = min(ds, dt)
    if not 1 <= latent_dim <= min(ds, dt):
        raise ValueError(f"latent_dim must be in [1, {min(ds, dt)}], got {latent_dim}")

    s_cuts = _chart_cuts(xs, data.source_angle_dims)
    t_cuts = _chart_cuts(xt, data.target_angle_dims)
    zs, mean_s, scale_s = _normalise(_to_chart(xs, s_cuts), "source")
    zt, mean_t, scale_t = _normalise(_to_chart(xt, t_cuts), "target")
    Ps, _ = _laplacian_projection(_subsample(zs, max_points), knn, latent_dim)
    Pt, _ = _laplacian_projection(_subsample(zt, max_points), knn, latent_dim)

    # lifts from shared latent coordinates back to each normalised domain
    Gs = np.linalg.lstsq(zs @ Ps, zs, rcond=None)[0].T  # (ds, latent)
    Gt = np.linalg.lstsq(zt @ Pt, zt, rcond=None)[0].T  # (dt, latent)

    # forward: s -> zs -> latent -> zt -> t
    fwd_norm = Gt @ Ps.T
    forward_A = (scale_t[:, None] * fwd_norm) / scale_s[None, :]
    forward_b = mean_t - forward_A @ mean_s
    inv_norm = Gs @ Pt.T
    inverse_A = (scale_s[:, None] * inv_norm) / scale_t[None, :]
    inverse_b = mean_s - inverse_A @ mean_t

    m = InterTaskMap(forward_A, forward_b, inverse_A, inverse_b,
                     norm_mean=(mean_s, mean_t), norm_scale=(scale_s, scale_t),
                     source_cuts=s_cuts, target_cuts=t_cuts)
    err = m.round_trip_error(xs)
    if err > round_trip_bound:
        raise ValueError(f"alignment round-trip error {err:.3g} exceeds bound {round_trip_bound}")
    m.round_trip_tol = max(err, 1e-9)
    return m


# -- serialization -----------------------------------------------------------

def _block(name, rows):
    out = [name]
    for r in np.atleast_2d(rows):
        out.append(" ".join(repr(float(v)) for v in r))
    return out


def dumps_map(m):
    lines = []
    lines += _block("FORWARD_A", m.forward_A)
    lines += _block("FORWARD_B", m.forward_b)
    lines += _block("INVERSE_A", m.inverse_A)
    lines += _block("INVERSE_B", m.inverse_b)
    means = [np.zeros(m.source_dim) if v is None else v for v in m.norm_mean]
    scales = [np.ones(m.source_dim) if v is None else v for v in m.norm_scale]
    lines += ["NORM_MEAN", " ".join(map(repr, map(float, means[0]))), " ".join(map(repr, map(float, means[1])))]
    lines += ["NORM_SCALE", " ".join(map(repr, map(float, scales[0]))), " ".join(map(repr, map(float, scales[1])))]
    lines += ["SOURCE_CUTS", " ".join(f"{d}:{c!r}" for d, c in sorted(m.source_cuts.items()))]
    lines += ["TARGET_CUTS", " ".join(f"{d}:{c!r}" for d, c in sorted(m.target_cuts.items()))]
    lines += ["ROUND_TRIP_TOL", repr(float(m.round_trip_tol))]
    return "\n".join(lines) + "\n"


def loads_map(text):
    blocks, name = {}, None
    for ln in text.splitlines():
        if ln and ln.split()[0].isupper() and ":" not in ln and not ln[0] in "-0123456789.":
            name = ln.strip()
            blocks[name] = []
        elif name is not None:
            blocks[name].append(ln)

    def mat(key):
        return np.array([[float(v) for v in r.split()] for r in blocks[key] if r.strip()])

    def cuts(key):
        items = " ".join(blocks.get(key, [])).split()
        return {int(k): float(v) for k, v in (it.split(":") for it in items)}

    mean_rows = [np.array([float(v) for v in r.split()]) for r in blocks["NORM_MEAN"] if r.strip()]
    scale_rows = [np.array([float(v) for v in r.split()]) for r in blocks["NORM_SCALE"] if r.strip()]
    return InterTaskMap(
        mat("FORWARD_A"), mat("FORWARD_B").ravel(), mat("INVERSE_A"), mat("INVERSE_B").ravel(),
        norm_mean=tuple(mean_rows), norm_scale=tuple(scale_rows),
        source_cuts=cuts("SOURCE_CUTS"), target_cuts=cuts("TARGET_CUTS"),
        round_trip_tol=float(blocks.get("ROUND_TRIP_TOL", ["0"])[0]),
    )


def save_map(m, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_map(m))


def load_map(path):
    with open(path, encoding="utf-8") as fh:
        return loads_map(fh.read())
