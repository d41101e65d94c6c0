"""Adversarial points of linear interpolants in high dimension.

Training points are ``n`` i.i.d. draws from ``N(0, I/d)`` in ``R^d`` with
``n << d`` and labels ``sign(x[0])``; only the first coordinate carries
signal. In this regime the points are nearly orthonormal, and any linear
function fitting all labels exactly has a large gradient, so every training
point sits close to the decision boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .attacks import AttackResult
from .margin import LabeledSet

__all__ = [
    "GaussianDataset",
    "LinearInterpolant",
    "sample_gaussian_dataset",
    "min_norm_interpolant",
    "gd_interpolant",
    "span_residual",
    "orthogonality_stats",
    "gradient_norm_prediction",
    "epsilon_threshold_prediction",
    "epsilon_adversarial",
    "directional_derivative_check",
]


@dataclass(frozen=True)
class GaussianDataset:
    X: np.ndarray  # (n, d)
    y: np.ndarray  # (n,) of +/-1
    seed: int

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def sigma(self) -> float:
        return 1.0 / math.sqrt(self.d)

    def labeled_set(self) -> LabeledSet:
        return LabeledSet.from_arrays(self.X, self.y)


@dataclass(frozen=True)
class LinearInterpolant:
    w: np.ndarray
    residual: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))


def sample_gaussian_dataset(n: int, d: int, seed: int) -> GaussianDataset:
    """Draw ``n`` points from ``N(0, I/d)`` with labels ``sign(x[0])``.

    Both labels are not guaranteed to appear.
    """
    if n < 2 or d < 2:
        raise ValueError("need n >= 2 and d >= 2")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) / math.sqrt(d)
    # a first coordinate of exactly zero has probability zero; redraw anyway
    while np.any(X[:, 0] == 0):
        bad = X[:, 0] == 0
        X[bad] = rng.standard_normal((int(bad.sum()), d)) / math.sqrt(d)
    y = np.sign(X[:, 0])
    X.setflags(write=False)
    y.setflags(write=False)
    return GaussianDataset(X, y, seed)


def _data_arrays(data):
    if isinstance(data, GaussianDataset):
        return data.X, data.y
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)


def min_norm_interpolant(data, *, tol: float = 1e-10) -> LinearInterpolant:
    """Least-norm ``w`` with ``w @ x_i = y_i`` for every training point.

    Solved as ``w = X^T (X X^T)^{-1} y`` through a Cholesky factorisation of
    the ``n x n`` Gram matrix. ``data`` is a :class:`GaussianDataset` or an
    ``(X, y)`` pair.

    Raises
    ------
    ValueError
        If ``n > d`` (the ``d < n`` regime is not covered) or the rows of
        ``X`` are numerically dependent.
    """
    X, y = _data_arrays(data)
    n, d = X.shape
    if n > d:
        raise ValueError(f"need n <= d for exact interpolation, got n={n}, d={d}")
    G = X @ X.T
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= tol * max(eig[-1], 1e-300):
        raise ValueError("training points are linearly dependent")
    coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), y)
    w = X.T @ coef
    w.setflags(write=False)
    return LinearInterpolant(w, float(np.max(np.abs(X @ w - y))))


def gd_interpolant(data, lr: float, steps: int, *, init=None, init_in_span: bool = True, seed: int = 0):
    """Gradient descent on ``(1/2) |X w - y|^2``.

    The starting point is ``init`` if given; otherwise zero when
    ``init_in_span`` is true, or a random Gaussian vector (which generally
    has a component outside the span of the data) when it is false. Each
    update is a combination of the training points, so the component of
    ``w`` orthogonal to their span never changes.

    Returns ``(interpolant, w_init)``.
    """
    X, y = _data_arrays(data)
    d = X.shape[1]
    if init is not None:
        w = np.array(init, dtype=np.float64)
    elif init_in_span:
        w = np.zeros(d)
    else:
        w = np.random.default_rng(seed).standard_normal(d)
    w0 = w.copy()
    for _ in range(steps):
        r = X @ w - y
        w = w - lr * (X.T @ r)
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) > 1e12:
            raise FloatingPointError("gradient descent diverged")
    return LinearInterpolant(w, float(np.max(np.abs(X @ w - y)))), w0


def span_residual(X, w) -> np.ndarray:
    """Component of ``w`` orthogonal to the row space of ``X``."""
    Q, _ = np.linalg.qr(np.asarray(X, dtype=np.float64).T)
    return w - Q @ (Q.T @ w)


def orthogonality_stats(data) -> dict:
    """Near-orthogonality geometry of the training set.

    Reports the largest off-diagonal inner product ``|<x_i, x_j>|``, the
    spread of ``|x_j - x_i|`` over opposite-label pairs (about sqrt(2) for
    near-orthonormal data), and the spread of ``<v_ij, v_ik> / (|v_ij||v_ik|)``
    over pairs of opposite-label partners ``j != k`` of the same ``i`` (about
    1/2, an angle of pi/3).
    """
    X, y = _data_arrays(data)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    G = X @ X.T
    off = np.abs(G[~np.eye(n, dtype=bool)])
    stats = {"max_abs_inner": float(off.max())}

    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    lengths, cosines = [], []
    for group, other in ((pos, neg), (neg, pos)):
        for i in group:
            V = X[other] - X[i]
            L = np.linalg.norm(V, axis=1)
            if group is pos:
                lengths.append(L)
            if len(other) >= 2:
                U = V / L[:, None]
                C = U @ U.T
                cosines.append(C[np.triu_indices(len(other), 1)])
    for key, vals in (("pair_distance", lengths), ("pair_cosine", cosines)):
        flat = np.concatenate(vals) if vals else np.array([])
        if flat.size:
            stats[f"{key}_min"] = float(flat.min())
            stats[f"{key}_mean"] = float(flat.mean())
            stats[f"{key}_max"] = float(flat.max())
        else:
            stats[f"{key}_min"] = stats[f"{key}_mean"] = stats[f"{key}_max"] = math.nan
    return stats


def gradient_norm_prediction(n: int) -> float:
    """Heuristic gradient norm ``sqrt(n) / (2 sin(pi/3)) = sqrt(n/3)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.sqrt(n) / (2.0 * math.sin(math.pi / 3))


def epsilon_threshold_prediction(n: int) -> float:
    """Heuristic flipping radius ``2 sin(pi/3) / sqrt(n)``, the reciprocal of the norm prediction."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 2.0 * math.sin(math.pi / 3) / math.sqrt(n)


def epsilon_adversarial(x, y: int, w, eps: float) -> tuple[AttackResult, float]:
    """Move ``x`` a distance ``eps`` along ``-y * w/|w|`` and test for a sign flip.

    For the linear score ``w @ z`` this is the optimal direction. Returns the
    attack result and the exact minimal flipping distance ``|w @ x| / |w|``.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    wn = float(np.linalg.norm(w))
    if wn == 0:
        raise ValueError("zero gradient")
    score = float(w @ x)
    if score == 0 or np.sign(score) != y:
        raise ValueError("x is not classified as y")
    z = x - y * eps * w / wn
    flipped = np.sign(w @ z) != y
    return AttackResult(z, float(eps), bool(flipped), 1), abs(score) / wn


def directional_derivative_check(data, w) -> dict:
    """Compare ``|<w, v_ij>|`` with ``2`` and ``|<w, v_ij/|v_ij|>|`` with sqrt(2).

    For an exact interpolant ``<w, x_j - x_i> = y_j - y_i = -2`` whenever
    ``y_i = 1, y_j = -1``, so the unit-direction derivative equals
    ``2 / |v_ij|``.
    """
    X, y = _data_arrays(data)
    w = np.asarray(w, dtype=np.float64)
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both labels must be present")
    V = (X[neg][None, :, :] - X[pos][:, None, :]).reshape(-1, X.shape[1])
    L = np.linalg.norm(V, axis=1)
    raw = np.abs(V @ w)
    unit = raw / L
    return {
        "pairs": int(V.shape[0]),
        "max_dev_from_two": float(np.max(np.abs(raw - 2.0))),
        "max_dev_from_two_over_length": float(np.max(np.abs(unit - 2.0 / L))),
        "unit_derivative_min": float(unit.min()),
        "unit_derivative_mean": float(unit.mean()),
        "unit_derivative_max": float(unit.max()),
        "fraction_near_sqrt2": float(np.mean((unit > 1.3) & (unit < 1.6))),
        "unit_derivatives": unit,
    }
