"""Linear separability of shift orbits, plus a brute-force max-margin oracle.

The orbit result only needs DC components: every shift of a signal has the
same DC value, and the orbit average of any signal is the constant vector
carrying that value, so the best separating normal for whole orbits is the
constant direction. :func:`oracle_max_margin` solves the hard-margin problem
on explicit point clouds and is used to cross-check that claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import Classifier
from .signals import dc_component, dc_direction, shift_orbit

__all__ = [
    "ConvergenceError",
    "LabeledSet",
    "SeparatorReport",
    "orbit_margin",
    "oracle_max_margin",
    "functional_margin",
    "normal_is_unique",
    "linear_classifier",
]


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


def _as_points(points, name: str) -> np.ndarray:
    arr = np.array(points, dtype=np.float64, ndmin=2)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty list of equal-length vectors")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LabeledSet:
    """Two classes of signals: ``class_pos`` carries label +1, ``class_neg`` label -1."""

    class_pos: np.ndarray
    class_neg: np.ndarray

    def __post_init__(self):
        pos = _as_points(self.class_pos, "class_pos")
        neg = _as_points(self.class_neg, "class_neg")
        if pos.shape[1] != neg.shape[1]:
            raise ValueError(f"class dimensions differ: {pos.shape[1]} vs {neg.shape[1]}")
        object.__setattr__(self, "class_pos", pos)
        object.__setattr__(self, "class_neg", neg)

    @classmethod
    def from_arrays(cls, X, y) -> "LabeledSet":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        return cls(X[y > 0], X[y < 0])

    @property
    def dim(self) -> int:
        return self.class_pos.shape[1]

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.class_pos, self.class_neg])

    @property
    def labels(self) -> np.ndarray:
        return np.concatenate([np.ones(len(self.class_pos)), -np.ones(len(self.class_neg))])

    def __len__(self) -> int:
        return len(self.class_pos) + len(self.class_neg)

    def orbits(self) -> "LabeledSet":
        """Expand each class to the full list of shifts of its members."""
        return LabeledSet(
            np.vstack([shift_orbit(x) for x in self.class_pos]),
            np.vstack([shift_orbit(x) for x in self.class_neg]),
        )


@dataclass(frozen=True)
class SeparatorReport:
    """Outcome of a max-margin computation.

    ``normal`` and ``threshold`` are oriented so that ``class_pos`` lies on
    the side ``<normal, z> - threshold >= 0``; ``margin`` is the gap between
    the classes measured along the unit ``normal``. ``orientation`` is +1
    when the positive class has the larger DC component, -1 when the
    negative class does, and 0 when the report is not separable.
    """

    separable: bool
    margin: float
    normal: np.ndarray
    threshold: float
    orientation: int = 0
    unique: bool | None = field(default=None, compare=False)

    def classifier(self) -> Classifier:
        return linear_classifier(self.normal, self.threshold)


def orbit_margin(data: LabeledSet) -> SeparatorReport:
    """Max-margin separator of the shift orbits of both classes.

    Only the DC components enter. Ties (zero DC gap) are not separable.

    Examples
    --------
    >>> orbit_margin(LabeledSet([[0.0, 0.0]], [[1.0, 1.0]])).margin  # doctest: +ELLIPSIS
    1.414213...
    """
    d = data.dim
    dc_pos = dc_component(data.class_pos)
    dc_neg = dc_component(data.class_neg)
    wbar = dc_direction(d)
    if dc_neg.max() < dc_pos.min():
        lo, hi = dc_neg.max(), dc_pos.min()
        return SeparatorReport(True, float(hi - lo), wbar, float((lo + hi) / 2), 1)
    if dc_pos.max() < dc_neg.min():
        lo, hi = dc_pos.max(), dc_neg.min()
        return SeparatorReport(True, float(hi - lo), -wbar, float(-(lo + hi) / 2), -1)
    return SeparatorReport(False, 0.0, wbar, 0.0, 0)


def functional_margin(points_pos, points_neg, normal) -> float:
    """``min <n, p> - max <n, q>`` along the normalised direction ``n``."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    return float(np.min(np.asarray(points_pos) @ n) - np.max(np.asarray(points_neg) @ n))


def _affine_minimizer(Zs: np.ndarray) -> np.ndarray:
    # min ||Zs^T mu||^2 subject to sum(mu) == 1, through the KKT system
    k = Zs.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = Zs @ Zs.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def _min_norm_point(Z: np.ndarray, max_iter: int, tol: float):
    """Wolfe's algorithm for the minimum-norm point of ``conv(rows of Z)``.

    Returns ``(point, support_indices, weights)``.
    """
    sq = np.einsum("ij,ij->i", Z, Z)
    scale = max(float(sq.max()), 1e-300)
    S = [int(np.argmin(sq))]
    lam = np.array([1.0])
    x = Z[S[0]].copy()
    for _ in range(max_iter):
        proj = Z @ x
        j = int(np.argmin(proj))
        if x @ x - proj[j] <= tol * scale or j in S:
            return x, S, lam
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            mu = _affine_minimizer(Z[S])
            if np.all(mu > 1e-14):
                lam = mu
                x = mu @ Z[S]
                break
            neg = mu <= 1e-14
            ratios = lam[neg] / (lam[neg] - mu[neg])
            theta = float(np.min(ratios))
            lam = lam + theta * (mu - lam)
            keep = lam > 1e-14
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
            x = lam @ Z[S]
    raise ConvergenceError(f"min-norm point did not converge in {max_iter} iterations")


def oracle_max_margin(
    points_pos,
    points_neg,
    *,
    max_points: int = 64,
    max_dim: int = 64,
    max_iter: int = 10_000,
    tol: float = 1e-15,
    check_unique: bool = True,
) -> SeparatorReport:
    """Hard-margin separating hyperplane (with bias) for two explicit point sets.

    The max margin equals the distance between the convex hulls of the two
    classes, i.e. the norm of the minimum-norm point of the Minkowski
    difference hull ``conv{p_i - q_j}``, which Wolfe's active-set algorithm
    finds exactly up to the small linear solves it performs.

    No orbit expansion is done here; pass expanded orbits explicitly.

    Raises
    ------
    ValueError
        If more than ``max_points`` points or more than ``max_dim`` dimensions
        are given.
    ConvergenceError
        If the active-set loop exceeds ``max_iter`` major iterations.
    """
    P = _as_points(points_pos, "points_pos")
    N = _as_points(points_neg, "points_neg")
    if P.shape[1] != N.shape[1]:
        raise ValueError("point sets have different dimensions")
    if len(P) + len(N) > max_points:
        raise ValueError(f"oracle limited to {max_points} points, got {len(P) + len(N)}")
    d = P.shape[1]
    if d > max_dim:
        raise ValueError(f"oracle limited to dimension {max_dim}, got {d}")

    Z = (P[:, None, :] - N[None, :, :]).reshape(-1, d)
    x, _, _ = _min_norm_point(Z, max_iter, tol)
    dist = float(np.linalg.norm(x))
    spread = float(np.sqrt(np.max(np.einsum("ij,ij->i", Z, Z))))
    if dist <= 1e-10 * max(spread, 1.0):
        e = np.zeros(d)
        e[0] = 1.0
        return SeparatorReport(False, 0.0, e, 0.0, 0, unique=None)

    normal = x / dist
    hi = float(np.min(P @ normal))
    lo = float(np.max(N @ normal))
    margin = hi - lo
    if margin <= 0:
        e = np.zeros(d)
        e[0] = 1.0
        return SeparatorReport(False, 0.0, e, 0.0, 0, unique=None)
    unique = normal_is_unique(P, N, normal) if check_unique else None
    dc_gap = float(np.mean(dc_component(P)) - np.mean(dc_component(N)))
    return SeparatorReport(True, margin, normal, (hi + lo) / 2, int(np.sign(dc_gap)), unique=unique)


def normal_is_unique(points_pos, points_neg, normal, delta: float = 1e-3) -> bool:
    """True when tilting ``normal`` by ``delta`` in any axis direction lowers the margin."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    base = functional_margin(points_pos, points_neg, n)
    d = n.size
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        e -= (e @ n) * n
        if np.linalg.norm(e) < 1e-12:
            continue
        e /= np.linalg.norm(e)
        for sgn in (1.0, -1.0):
            if functional_margin(points_pos, points_neg, n + sgn * delta * e) >= base - 1e-12:
                return False
    return True


def linear_classifier(normal, threshold: float) -> Classifier:
    """Affine decision ``g(z) = <normal, z> - threshold``."""
    n = np.array(normal, dtype=np.float64)
    if n.ndim != 1 or not np.any(n != 0):
        raise ValueError("normal must be a non-zero vector")
    n.setflags(write=False)
    t = float(threshold)
    return Classifier(
        decision=lambda z: z @ n - t,
        grad=lambda z: n.copy(),
        dim=n.size,
        name="linear",
    )
