"""Cyclic signal algebra.

A signal is a 1-D float array of length ``d`` read as a cyclic image.
Functions here never modify their inputs; every result is a fresh array.
Indexing is 0-based: ``circular_shift(x, s)[i] == x[(i + s) % d]``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_signal",
    "circular_shift",
    "dc_component",
    "dc_direction",
    "shift_orbit",
    "cyclic_patches",
    "circular_convolve",
]


def as_signal(x, *, copy: bool = True) -> np.ndarray:
    """Validate ``x`` as a finite 1-D float signal and return it read-only."""
    arr = np.array(x, dtype=np.float64, copy=copy)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"signal must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains non-finite values")
    arr.setflags(write=False)
    return arr


def _check_shift(s, d: int) -> int:
    if int(s) != s or not 0 <= s < d:
        raise ValueError(f"shift must be an integer in [0, {d - 1}], got {s!r}")
    return int(s)


def circular_shift(x, s: int) -> np.ndarray:
    """Rotate ``x`` left by ``s`` positions.

    >>> circular_shift([1, 2, 3, 4], 1)
    array([2., 3., 4., 1.])
    """
    x = np.asarray(x, dtype=np.float64)
    s = _check_shift(s, x.shape[-1])
    return np.roll(x, -s, axis=-1)


def dc_component(x) -> float | np.ndarray:
    """Projection of ``x`` on the constant unit vector, ``sum(x) / sqrt(d)``.

    Works along the last axis, so a stack of signals gives one value each.
    """
    x = np.asarray(x, dtype=np.float64)
    return x.sum(axis=-1) / np.sqrt(x.shape[-1])


def dc_direction(d: int) -> np.ndarray:
    """The constant unit vector ``(1/sqrt(d)) * ones(d)``."""
    return np.full(d, 1.0 / np.sqrt(d))


def shift_orbit(x) -> np.ndarray:
    """All ``d`` circular shifts of ``x`` stacked as rows; row ``s`` is shift ``s``.

    Duplicates are kept, so the result always has shape ``(d, d)``.
    """
    x = as_signal(x)
    d = x.size
    idx = (np.arange(d)[:, None] + np.arange(d)[None, :]) % d
    return x[idx]


def cyclic_patches(x, q: int) -> np.ndarray:
    """Length-``q`` cyclic windows of ``x``, one per starting position.

    Returns an array of shape ``(..., d, q)`` whose entry ``[i, j]`` is
    ``x[(i + j) % d]``. Leading batch axes are passed through.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if int(q) != q or not 1 <= q <= d:
        raise ValueError(f"patch length must be in [1, {d}], got {q!r}")
    idx = (np.arange(d)[:, None] + np.arange(int(q))[None, :]) % d
    return x[..., idx]


def circular_convolve(w, x) -> np.ndarray:
    """Correlate filter ``w`` (length ``q``) against every cyclic patch of ``x``.

    Output position ``i`` is ``<w, x[i:i+q]>`` with wrap-around, which is the
    stride-1 "same"-mode circular convolution used by the conv networks.
    The operation is shift-equivariant::

        circular_convolve(w, circular_shift(x, s)) == circular_shift(circular_convolve(w, x), s)
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("filter must be 1-D")
    return cyclic_patches(x, w.size) @ w
