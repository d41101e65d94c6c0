"""Real-valued binary classifiers with the sign rule ``label = +1 iff g(z) >= 0``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["Classifier", "label_of"]


def label_of(value):
    """Sign rule with ties going to +1."""
    return np.where(np.asarray(value) >= 0, 1, -1) if np.ndim(value) else (1 if value >= 0 else -1)


@dataclass(frozen=True)
class Classifier:
    """A decision function ``g`` over signals of length ``dim``.

    ``decision`` must accept either a single signal of shape ``(dim,)`` and
    return a float, or a batch of shape ``(b, dim)`` and return ``(b,)``.
    ``grad`` is optional; when absent, callers fall back to finite
    differences (see :func:`shiftlab.attacks.gradient`).
    """

    decision: Callable[[np.ndarray], float | np.ndarray]
    dim: int
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "classifier"

    def __call__(self, z):
        return self.decision(np.asarray(z, dtype=np.float64))

    def label(self, z):
        return label_of(self(z))
