"""Finite two-layer ReLU networks and their full-batch gradient-descent trainer.

Two architectures, both bias-free and without width scaling:

* :class:`FcNet`      ``f(x) = v^T relu(W x)``
* :class:`ConvGapNet` ``f(x) = (1/d) v^T relu(W * x) 1_d`` with ``*`` the
  circular convolution of ``x`` with each length-``q`` filter row of ``W``.

The ReLU derivative at exactly zero is taken as zero.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import Classifier
from .margin import LabeledSet
from .signals import cyclic_patches

__all__ = [
    "FcNet",
    "ConvGapNet",
    "TrainConfig",
    "TrainingDivergedError",
    "fc_forward",
    "conv_forward",
    "forward",
    "input_gradient",
    "loss_and_grads",
    "init_normal",
    "empirical_ntk",
    "suggest_learning_rate",
    "train_full_batch",
    "net_classifier",
    "save_net",
    "load_net",
]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class FcNet:
    W: np.ndarray  # (m, d)
    v: np.ndarray  # (m,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.W.ndim != 2 or self.v.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent shapes W{self.W.shape} v{self.v.shape}")

    @property
    def width(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "FcNet":
        return replace(self, W=self.W.copy(), v=self.v.copy())


@dataclass
class ConvGapNet:
    W: np.ndarray  # (m, q) filters
    v: np.ndarray  # (m,)
    d: int

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.W.ndim != 2 or self.v.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent shapes W{self.W.shape} v{self.v.shape}")
        if not 1 <= self.W.shape[1] <= self.d:
            raise ValueError(f"filter length {self.W.shape[1]} must be in [1, {self.d}]")

    @property
    def width(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "ConvGapNet":
        return replace(self, W=self.W.copy(), v=self.v.copy())


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch gradient descent on the mean squared error to +/-1 labels.

    ``target_loss`` stops training early once reached; ``None`` runs all
    ``steps``. ``seed`` is only recorded, full-batch descent draws nothing.
    """

    learning_rate: float
    steps: int
    seed: int = 0
    target_loss: float | None = None
    loss: str = field(default="squared", init=False)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")


def _check_input(net, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != net.d:
        raise ValueError(f"input length {X.shape[-1]} does not match network input {net.d}")
    return X


def fc_forward(net: FcNet, x):
    x = _check_input(net, x)
    return np.maximum(x @ net.W.T, 0.0) @ net.v


def _use_fft(d: int, q: int) -> bool:
    # measured crossover: patch matmuls win for short filters
    return 2 * q > d


def _conv_pre(net: ConvGapNet, x):
    """Pre-activations ``R[..., i, k] = <patch_i(x), W[k]>``, shape ``(..., d, m)``."""
    d, q = net.d, net.q
    if _use_fft(d, q):
        Wf = np.fft.rfft(net.W, n=d, axis=-1)                 # (m, F)
        xf = np.fft.rfft(x, axis=-1)[..., None, :]             # (..., 1, F)
        return np.swapaxes(np.fft.irfft(xf * Wf.conj(), n=d, axis=-1), -1, -2)
    P = cyclic_patches(x, q)
    return (P.reshape(-1, q) @ net.W.T).reshape(P.shape[:-1] + (net.width,))


def _conv_corr(net: ConvGapNet, A, x):
    """``C[..., k, j] = sum_i A[..., i, k] x[..., (i + j) % d]`` for ``j < q``."""
    d, q = net.d, net.q
    if _use_fft(d, q):
        Af = np.fft.rfft(np.swapaxes(A, -1, -2), axis=-1)      # (..., m, F)
        xf = np.fft.rfft(x, axis=-1)[..., None, :]
        return np.fft.irfft(Af.conj() * xf, n=d, axis=-1)[..., :q]
    P = cyclic_patches(x, q)
    return np.matmul(np.swapaxes(A, -1, -2), P)


def conv_forward(net: ConvGapNet, x):
    x = _check_input(net, x)
    return np.maximum(_conv_pre(net, x), 0.0).mean(axis=-2) @ net.v


def forward(net, x):
    """Network output for one signal ``(d,)`` or a batch ``(b, d)``."""
    return fc_forward(net, x) if isinstance(net, FcNet) else conv_forward(net, x)


def input_gradient(net, x) -> np.ndarray:
    """Gradient of the network output with respect to a single input signal."""
    x = _check_input(net, x)
    if x.ndim != 1:
        raise ValueError("input_gradient takes a single signal")
    if isinstance(net, FcNet):
        mask = (net.W @ x) > 0
        return net.W.T @ (net.v * mask)
    d, q = net.d, net.q
    R = _conv_pre(net, x)
    if _use_fft(d, q):
        # sum_k circular convolution of (mask_k * v_k / d) with filter k
        A = np.fft.rfft(((R > 0) * (net.v / d)).T, axis=-1)       # (m, F)
        Wf = np.fft.rfft(net.W, n=d, axis=-1)
        return np.fft.irfft(np.einsum("mf,mf->f", A, Wf), n=d)
    G = ((R > 0) * net.v) @ net.W / d      # (d, q): d f / d patch[i, j]
    idx = (np.arange(d)[:, None] + np.arange(q)[None, :]) % d
    return np.bincount(idx.ravel(), weights=G.ravel(), minlength=d)


def loss_and_grads(net, X, y):
    """Mean squared error over the batch and its gradients ``(loss, dW, dv)``."""
    X = _check_input(net, X)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if isinstance(net, FcNet):
        pre = X @ net.W.T
        act = np.maximum(pre, 0.0)
        f = act @ net.v
        r = 2.0 * (f - y) / n
        dv = act.T @ r
        dW = ((pre > 0) * net.v * r[:, None]).T @ X
    else:
        R = _conv_pre(net, X)
        H = np.maximum(R, 0.0).mean(axis=-2)
        f = H @ net.v
        r = 2.0 * (f - y) / n
        dv = H.T @ r
        # dW[k] = v_k / d * sum_b r_b * sum_i mask[b,i,k] * patch_i(x_b)
        mask = R > 0
        if _use_fft(net.d, net.q):
            Mf = np.fft.rfft(np.swapaxes(mask, -1, -2).astype(np.float64), axis=-1)   # (n, m, F)
            Xf = np.fft.rfft(X, axis=-1) * r[:, None]
            S = np.einsum("bmf,bf->mf", Mf.conj(), Xf)
            C = np.fft.irfft(S, n=net.d, axis=-1)[:, : net.q]
        else:
            m, q = net.W.shape
            P = cyclic_patches(X, q)
            C = (mask * r[:, None, None]).reshape(-1, m).T @ P.reshape(-1, q)
        dW = net.v[:, None] * C / net.d
    loss = float(np.mean((f - y) ** 2))
    return loss, dW, dv


def init_normal(arch: str, d: int, width: int, seed: int, q: int | None = None, *, symmetric: bool = False):
    """Standard-normal initialisation of an ``"fc"`` or ``"conv"`` network.

    With ``symmetric=True`` only half of the hidden units are drawn; the
    other half copies their first-layer weights with negated output weights,
    so the network output is identically zero at initialisation while the
    tangent kernel is unchanged. ``width`` must then be even.
    """
    rng = np.random.default_rng(seed)
    if arch == "fc":
        cols = d
    elif arch == "conv":
        cols = d if q is None else q
        if not 1 <= cols <= d:
            raise ValueError(f"filter length must be in [1, {d}]")
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    if width < 1:
        raise ValueError("width must be positive")
    if symmetric:
        if width % 2:
            raise ValueError("symmetric initialisation needs an even width")
        W = rng.standard_normal((width // 2, cols))
        v = rng.standard_normal(width // 2)
        W = np.vstack([W, W])
        v = np.concatenate([v, -v])
    else:
        W = rng.standard_normal((width, cols))
        v = rng.standard_normal(width)
    return FcNet(W, v) if arch == "fc" else ConvGapNet(W, v, d)


def empirical_ntk(net, X) -> np.ndarray:
    """Finite-width tangent kernel ``J J^T`` of the network on the rows of ``X``."""
    X = _check_input(net, X)
    if isinstance(net, FcNet):
        pre = X @ net.W.T
        act = np.maximum(pre, 0.0)
        mv = (pre > 0) * net.v
        return act @ act.T + (mv @ mv.T) * (X @ X.T)
    R = _conv_pre(net, X)
    H = np.maximum(R, 0.0).mean(axis=-2)
    G = _conv_corr(net, (R > 0).astype(np.float64), X) / net.d
    G *= net.v[None, :, None]
    Gf = G.reshape(G.shape[0], -1)
    return H @ H.T + Gf @ Gf.T


def suggest_learning_rate(net, X, fraction: float = 0.5) -> float:
    """Step size ``fraction * n / lambda_max`` of the empirical tangent kernel.

    Gradient descent on the mean squared error is stable in the linearised
    regime for step sizes below ``n / lambda_max``.
    """
    X = np.asarray(X, dtype=np.float64)
    lam = float(np.linalg.eigvalsh(empirical_ntk(net, X)).max())
    return fraction * X.shape[0] / lam


def train_full_batch(net, data: LabeledSet, cfg: TrainConfig):
    """Vanilla full-batch gradient descent. Returns ``(trained_net, losses)``.

    ``losses[t]`` is the loss before step ``t``; the last entry is the loss of
    the returned network. The input network is not modified.

    Raises
    ------
    TrainingDivergedError
        When the loss exceeds 1e12 or becomes non-finite.
    """
    X = data.points
    y = data.labels
    if not np.all(np.isfinite(X)):
        raise ValueError("training data must be finite")
    net = net.copy()
    losses = []
    for _ in range(cfg.steps):
        loss, dW, dv = loss_and_grads(net, X, y)
        if not np.isfinite(loss) or loss > 1e12:
            raise TrainingDivergedError(f"loss diverged to {loss!r} after {len(losses)} steps")
        losses.append(loss)
        if cfg.target_loss is not None and loss <= cfg.target_loss:
            return net, np.array(losses)
        net.W -= cfg.learning_rate * dW
        net.v -= cfg.learning_rate * dv
    final, _, _ = loss_and_grads(net, X, y)
    if not np.isfinite(final) or final > 1e12:
        raise TrainingDivergedError(f"loss diverged to {final!r}")
    losses.append(final)
    return net, np.array(losses)


def net_classifier(net) -> Classifier:
    """Freeze a copy of ``net`` behind the sign-rule classifier interface."""
    frozen = net.copy()
    for arr in (frozen.W, frozen.v):
        arr.setflags(write=False)
    kind = "fc_net" if isinstance(frozen, FcNet) else "conv_net"
    return Classifier(
        decision=lambda z: forward(frozen, z),
        grad=lambda z: input_gradient(frozen, z),
        dim=frozen.d,
        name=kind,
    )


# checkpoint layout: magic, version, kind, d, q, m, then W and v as
# little-endian float64 in row-major order
_MAGIC = b"SHLBNET\x00"
_HEADER = struct.Struct("<8sII3Q")
_VERSION = 1


def save_net(net, path) -> None:
    kind = 0 if isinstance(net, FcNet) else 1
    q = net.d if kind == 0 else net.q
    header = _HEADER.pack(_MAGIC, _VERSION, kind, net.d, q, net.width)
    body = np.ascontiguousarray(net.W, dtype="<f8").tobytes() + np.ascontiguousarray(net.v, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_net(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated checkpoint")
    magic, version, kind, d, q, m = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a shiftlab network checkpoint")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    cols = d if kind == 0 else q
    expected = _HEADER.size + 8 * (m * cols + m)
    if len(raw) != expected:
        raise ValueError(f"checkpoint size {len(raw)} does not match header (expected {expected})")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    W = flat[: m * cols].reshape(m, cols).copy()
    v = flat[m * cols:].copy()
    if kind == 0:
        return FcNet(W, v)
    if kind == 1:
        return ConvGapNet(W, v, d)
    raise ValueError(f"unknown network kind {kind}")
