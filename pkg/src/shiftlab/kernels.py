"""Two-layer NTK kernels, kernel ridge regression and the antipodal closed forms.

``ntk_fc`` is the tangent kernel of a bias-free two-layer ReLU network,

    k(z, x) = (2 <z, x> (pi - phi) + |z| |x| sin(phi)) / pi,

with ``phi`` the angle between ``z`` and ``x``. ``cntk_gap`` averages that
kernel over every pair of cyclic patches of its two arguments, which is the
tangent kernel of a circular-convolution layer followed by global average
pooling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .classifier import Classifier
from .signals import cyclic_patches

__all__ = [
    "KernelDataError",
    "SingularSystemError",
    "DegenerateClassifierError",
    "KernelKind",
    "FC_NTK",
    "GramMatrix",
    "KernelModel",
    "ntk_fc",
    "cntk_gap",
    "gram",
    "ridge_fit",
    "antipodal_ntk_classifier",
    "antipodal_cntk_classifier",
    "two_point_sign_rule",
]

# reject lambda == 0 solves above this 2-norm condition number
MAX_CONDITION = 1e12
_SNAP = 16 * np.finfo(np.float64).eps


class KernelDataError(ValueError):
    """Gram matrix fails symmetry or positive semidefiniteness checks."""


class SingularSystemError(np.linalg.LinAlgError):
    """Interpolation requested on a numerically singular Gram matrix."""


class DegenerateClassifierError(ValueError):
    """The closed-form classifier would be identically zero."""


def _ntk_from_stats(dot, nz, nx):
    dot = np.asarray(dot, dtype=np.float64)
    prod = np.asarray(nz * nx, dtype=np.float64)
    safe = np.where(prod > 0, prod, 1.0)
    cos = np.clip(dot / safe, -1.0, 1.0)
    # arccos amplifies rounding near +-1 to ~1e-8 in phi; snap (anti)parallel pairs
    cos = np.where(np.abs(cos) > 1.0 - _SNAP, np.sign(cos), cos)
    phi = np.arccos(cos)
    sin = np.sqrt(np.maximum(1.0 - cos * cos, 0.0))
    k = (2.0 * dot * (np.pi - phi) + prod * sin) / np.pi
    return np.where(prod > 0, k, 0.0)


def _norms(v):
    # one formula for both arguments keeps k(z, x) == k(x, z) bitwise
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def ntk_fc(z, x) -> float | np.ndarray:
    """FC-NTK between ``z`` and ``x``; zero when either has zero norm.

    ``z`` may be a batch of shape ``(b, d)``, in which case one value per row
    is returned.
    """
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = _ntk_from_stats(z @ x, _norms(z), _norms(x))
    return float(out) if out.ndim == 0 else out


def cntk_gap(z, x, q: int | None = None) -> float | np.ndarray:
    """CNTK with global average pooling and patch length ``q`` (default ``d``).

    ``K(z, x) = (1/d^2) sum_i sum_j k(z_i, x_j)`` over cyclic patches.
    ``z`` may be a batch ``(b, d)``.
    """
    z = np.asarray(z, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    q = d if q is None else q
    zp = cyclic_patches(z, q)              # (..., d, q)
    xp = cyclic_patches(x, q)              # (d, q)
    dots = zp @ xp.T                       # (..., d, d)
    nz = _norms(zp)[..., :, None]
    nx = _norms(xp)[None, :]
    k = _ntk_from_stats(dots, nz, nx)
    out = k.sum(axis=(-2, -1)) / (d * d)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelKind:
    """Which kernel to use: ``"fc_ntk"`` or ``"cntk_gap"`` with patch length ``q``."""

    variant: str
    q: int | None = None

    def __post_init__(self):
        if self.variant not in ("fc_ntk", "cntk_gap"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "fc_ntk" and self.q is not None:
            raise ValueError("fc_ntk takes no patch length")
        if self.q is not None and self.q < 1:
            raise ValueError("patch length must be >= 1")

    @classmethod
    def cntk(cls, q: int | None = None) -> "KernelKind":
        return cls("cntk_gap", q)

    def __call__(self, z, x):
        if self.variant == "fc_ntk":
            return ntk_fc(z, x)
        d = np.shape(x)[-1]
        if self.q is not None and self.q > d:
            raise ValueError(f"patch length {self.q} exceeds signal length {d}")
        return cntk_gap(z, x, self.q)

    def __str__(self):
        return "fc_ntk" if self.variant == "fc_ntk" else f"cntk_gap(q={self.q})"


FC_NTK = KernelKind("fc_ntk")


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    kind: KernelKind
    training_points: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def gram(kind: KernelKind, points, *, psd_tol: float = 1e-8) -> GramMatrix:
    """Kernel matrix ``H[i, j] = kind(points[i], points[j])``.

    Rows are assembled in order, each from one vectorised kernel call, so the
    result does not depend on anything but the inputs.

    Raises
    ------
    KernelDataError
        If the matrix is asymmetric beyond 1e-12 or has an eigenvalue below
        ``-psd_tol * max(diag)``.
    """
    X = np.array(points, dtype=np.float64, ndmin=2)
    if X.shape[0] < 1:
        raise ValueError("gram needs at least one point")
    n = X.shape[0]
    H = np.empty((n, n))
    for j in range(n):
        H[:, j] = kind(X, X[j])
    scale = max(float(np.max(np.abs(np.diag(H)))), 1e-300)
    if np.max(np.abs(H - H.T)) > 1e-12 * max(scale, 1.0):
        raise KernelDataError("Gram matrix is not symmetric")
    min_eig = float(np.linalg.eigvalsh((H + H.T) / 2).min())
    if min_eig < -psd_tol * scale:
        raise KernelDataError(f"Gram matrix is not PSD (min eigenvalue {min_eig:.3e})")
    H.setflags(write=False)
    X.setflags(write=False)
    return GramMatrix(H, kind, X)


@dataclass(frozen=True)
class KernelModel:
    """Fitted kernel regressor ``g(z) = sum_i alpha_i k(z, x_i)``."""

    gram: GramMatrix
    coefficients: np.ndarray
    ridge: float
    labels: np.ndarray

    def predict(self, z):
        z = np.asarray(z, dtype=np.float64)
        X = self.gram.training_points
        kind = self.gram.kind
        if z.ndim == 1:
            kv = np.array([kind(z, x) for x in X])
            return float(kv @ self.coefficients)
        kv = np.stack([kind(z, x) for x in X], axis=-1)
        return kv @ self.coefficients

    def residual(self) -> float:
        H = self.gram.entries
        r = H @ self.coefficients + self.ridge * self.coefficients - self.labels
        return float(np.max(np.abs(r)))

    def classifier(self) -> Classifier:
        return Classifier(self.predict, dim=self.gram.training_points.shape[1], name=f"krr[{self.gram.kind}]")


def ridge_fit(kind: KernelKind, points, labels, lam: float = 0.0) -> KernelModel:
    """Kernel ridge regression; ``lam = 0`` gives the minimum-norm interpolant.

    The ``lam = 0`` case refuses ill-conditioned systems instead of falling
    back to a pseudo-inverse.
    """
    if lam < 0:
        raise ValueError("ridge must be non-negative")
    G = gram(kind, points)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (G.n,):
        raise ValueError(f"expected {G.n} labels, got shape {y.shape}")
    A = G.entries + lam * np.eye(G.n)
    if lam == 0:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularSystemError(f"Gram matrix is singular (condition number {cond:.3e})")
    alpha = scipy.linalg.solve(A, y, assume_a="sym")
    alpha.setflags(write=False)
    return KernelModel(G, alpha, float(lam), y)


def antipodal_ntk_classifier(x) -> Classifier:
    """Minimum-norm FC-NTK interpolant of ``{(x, +1), (-x, -1)}``: ``g(z) = <z, x> / <x, x>``."""
    x = np.array(x, dtype=np.float64)
    xx = float(x @ x)
    if xx == 0:
        raise ValueError("x must be non-zero")
    x.setflags(write=False)
    return Classifier(
        decision=lambda z: (z @ x) / xx,
        grad=lambda z: x / xx,
        dim=x.size,
        name="antipodal_ntk",
    )


def antipodal_cntk_classifier(x, q: int | None = None) -> Classifier:
    """Minimum-norm CNTK-GAP interpolant of ``{(x, +1), (-x, -1)}``.

    ``g(z) = (2 c q / d^2) <z, 1> <x, 1>`` with ``c = 1 / (K(x,x) - K(x,-x))``.
    The decision boundary is the hyperplane ``<z, 1> = 0`` whatever ``x`` is.

    Raises
    ------
    DegenerateClassifierError
        When ``<x, 1> = 0``, which makes ``g`` identically zero.
    SingularSystemError
        When the 2x2 Gram matrix of ``{x, -x}`` is not invertible.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    q = d if q is None else int(q)
    s = float(x.sum())
    if s == 0:
        raise DegenerateClassifierError("<x, 1> = 0 gives an identically zero classifier")
    a = cntk_gap(x, x, q)
    b = cntk_gap(x, -x, q)
    H = np.array([[a, b], [b, a]])
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > MAX_CONDITION or a - b <= 0:
        raise SingularSystemError(f"Gram matrix of {{x, -x}} is singular (condition {cond:.3e})")
    scale = 2.0 * q * s / ((a - b) * d * d)
    slope = np.full(d, scale)
    slope.setflags(write=False)
    return Classifier(
        decision=lambda z: z.sum(axis=-1) * scale,
        grad=lambda z: slope.copy(),
        dim=d,
        name=f"antipodal_cntk(q={q})",
    )


def two_point_sign_rule(kind: KernelKind, x1, x2, z, *, tol: float = 1e-10) -> int:
    """Label of ``z`` under the interpolant of ``{(x1, +1), (x2, -1)}``.

    With equal self-kernels the interpolant is ``(k(z,x1) - k(z,x2)) / (a - b)``,
    so the label is decided by which training point is kernel-closer.
    Returns +1, -1, or 0 on an exact tie.
    """
    a1 = kind(x1, x1)
    a2 = kind(x2, x2)
    if abs(a1 - a2) > tol * max(1.0, abs(a1)):
        raise ValueError(f"self-kernels differ: k(x1,x1)={a1!r}, k(x2,x2)={a2!r}")
    b = kind(x1, x2)
    cond = np.linalg.cond(np.array([[a1, b], [b, a2]]))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystemError("Gram matrix of {x1, x2} is singular")
    diff = kind(z, x1) - kind(z, x2)
    return int(np.sign(diff))
