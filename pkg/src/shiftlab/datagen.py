"""Synthetic two-class datasets.

Every generator is a pure function of its arguments (and seed).
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .highdim import GaussianDataset, sample_gaussian_dataset
from .margin import LabeledSet

__all__ = [
    "DatasetSpec",
    "dots",
    "orth_vectors",
    "orth_frequencies",
    "common_component",
    "common_component_parts",
    "gaussian",
    "random_orthonormal",
    "build",
    "write_dataset_csv",
    "read_dataset_csv",
]


def random_orthonormal(k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` orthonormal rows in ``R^d``, Haar-distributed.

    Orthonormalises Gaussian draws with a QR factorisation and fixes the
    column signs with ``sign(diag(R))`` so the result is uniform on the
    Stiefel manifold.
    """
    if k > d:
        raise ValueError(f"cannot draw {k} orthonormal vectors in dimension {d}")
    A = rng.standard_normal((d, k))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return (Q * signs).T


def dots(d: int) -> LabeledSet:
    """A single +1 (class +1) or -1 (class -1) on a background of zeros."""
    if d < 1:
        raise ValueError("d must be >= 1")
    x = np.zeros(d)
    x[0] = 1.0
    return LabeledSet([x], [-x])


def orth_vectors(n: int, d: int, seed: int) -> LabeledSet:
    """``2n`` random orthonormal vectors; the first ``n`` form class +1."""
    if n < 1 or 2 * n > d:
        raise ValueError(f"need 1 <= n and 2n <= d, got n={n}, d={d}")
    V = random_orthonormal(2 * n, d, np.random.default_rng(seed))
    return LabeledSet(V[:n], V[n:])


def orth_frequencies(n: int, d: int) -> LabeledSet:
    """Unit-norm sines and cosines sampled at ``t/d``.

    Class +1 holds ``sin, cos(2 pi k t/d)`` for odd ``k <= 2n-1`` and class -1
    the same for even ``k <= 2n``, i.e. ``2n`` signals per class. Requires
    ``2n < d/2`` so that no frequency reaches Nyquist.
    """
    if n < 1 or not 2 * n < d / 2:
        raise ValueError(f"need 2n < d/2 to avoid aliasing, got n={n}, d={d}")
    t = np.arange(d) / d

    def waves(ks):
        rows = []
        for k in ks:
            for fn in (np.sin, np.cos):
                s = fn(2 * np.pi * k * t)
                rows.append(s / np.linalg.norm(s))
        return np.array(rows)

    return LabeledSet(waves(range(1, 2 * n, 2)), waves(range(2, 2 * n + 1, 2)))


def common_component_parts(n: int, d: int, seed: int):
    """The orthonormal ingredients ``(c1, c2, R1, R2)`` of :func:`common_component`."""
    if n < 1 or 2 * n + 2 > d:
        raise ValueError(f"need 2n + 2 <= d, got n={n}, d={d}")
    V = random_orthonormal(2 * n + 2, d, np.random.default_rng(seed))
    return V[0], V[1], V[2:n + 2], V[n + 2:]


def common_component(n: int, d: int, p: float, seed: int) -> LabeledSet:
    """Class ``j`` point ``i`` is ``p * c_j + r_i^j`` with all ingredients orthonormal.

    The direction ``(c1 - c2)/sqrt(2)`` separates the classes with a
    functional gap of ``sqrt(2) * p``.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    c1, c2, R1, R2 = common_component_parts(n, d, seed)
    return LabeledSet(p * c1 + R1, p * c2 + R2)


def gaussian(n: int, d: int, seed: int) -> GaussianDataset:
    return sample_gaussian_dataset(n, d, seed)


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative description of one dataset; ``build()`` materialises it."""

    kind: str
    d: int
    n: int = 1
    p: float = 0.0
    seed: int = 0

    def build(self):
        return build(self)


def build(spec: DatasetSpec):
    if spec.kind == "dots":
        return dots(spec.d)
    if spec.kind == "orth_vectors":
        return orth_vectors(spec.n, spec.d, spec.seed)
    if spec.kind == "orth_frequencies":
        return orth_frequencies(spec.n, spec.d)
    if spec.kind == "common_component":
        return common_component(spec.n, spec.d, spec.p, spec.seed)
    if spec.kind == "gaussian":
        return gaussian(spec.n, spec.d, spec.seed)
    raise ValueError(f"unknown dataset kind {spec.kind!r}")


_HEADER_RE = re.compile(r"^# shiftlab-dataset v1 d=(\d+)$")


def write_dataset_csv(data: LabeledSet, path) -> None:
    """One row per signal: ``d`` values then the label, 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# shiftlab-dataset v1 d={data.dim}\n")
    for x, y in zip(data.points, data.labels):
        buf.write(",".join(format(v, ".17g") for v in x))
        buf.write(f",{int(y)}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_dataset_csv(path) -> LabeledSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError("empty dataset file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise ValueError(f"bad dataset header: {lines[0]!r}")
    d = int(m.group(1))
    rows, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != d + 1:
            raise ValueError(f"line {lineno}: expected {d + 1} fields, got {len(fields)}")
        rows.append([float(v) for v in fields[:d]])
        labels.append(int(fields[d]))
    return LabeledSet.from_arrays(np.array(rows), np.array(labels))
