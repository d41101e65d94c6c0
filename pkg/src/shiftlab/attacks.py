"""Adversarial attacks on real-valued binary classifiers.

The attack objective is the negative margin ``-y * g(z)``; an attack
succeeds when the predicted label (ties at ``g = 0`` go to +1) differs from
``y``. Inputs are not clipped to any box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import Classifier, label_of
from .margin import LabeledSet

__all__ = [
    "AttackConfig",
    "AttackResult",
    "NonAffineError",
    "gradient",
    "finite_difference_gradient",
    "attack_rng",
    "pgd",
    "minimal_distance_linear",
    "minimal_distance_search",
    "robust_accuracy",
]


class NonAffineError(ValueError):
    """A classifier handed to an exact linear-distance routine is not affine."""


@dataclass(frozen=True)
class AttackConfig:
    norm: str = "L2"
    epsilon: float = 1.0
    steps: int = 10
    step_size: float | None = None
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.norm not in ("L2", "Linf"):
            raise ValueError(f"norm must be 'L2' or 'Linf', got {self.norm!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")

    @property
    def step(self) -> float:
        return self.epsilon / 5 if self.step_size is None else self.step_size


@dataclass(frozen=True)
class AttackResult:
    adversarial_point: np.ndarray
    perturbation_norm: float
    success: bool
    queries: int


def finite_difference_gradient(c: Classifier, z, h: float | None = None) -> np.ndarray:
    """Central differences with step ``1e-5 * (1 + |z|)`` unless ``h`` is given."""
    z = np.asarray(z, dtype=np.float64)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(z))
    g = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (c(z + e) - c(z - e)) / (2 * h)
    return g


def gradient(c: Classifier, z) -> np.ndarray:
    """Analytic gradient when the classifier provides one, else finite differences."""
    z = np.asarray(z, dtype=np.float64)
    g = c.grad(z) if c.grad is not None else finite_difference_gradient(c, z)
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    return g


def attack_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for the attack on point ``index``; identical in serial and parallel runs."""
    return np.random.default_rng([int(seed), int(index)])


def _norm(delta, kind: str) -> float:
    return float(np.linalg.norm(delta)) if kind == "L2" else float(np.max(np.abs(delta)))


def _project(z, x, eps: float, kind: str):
    delta = z - x
    if kind == "L2":
        n = np.linalg.norm(delta)
        if n > eps:
            delta = delta * (eps / n)
    else:
        delta = np.clip(delta, -eps, eps)
    return x + delta


def _random_start(x, eps: float, kind: str, rng: np.random.Generator):
    d = x.size
    if kind == "L2":
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        return x + eps * rng.uniform() ** (1.0 / d) * u
    return x + rng.uniform(-eps, eps, size=d)


def pgd(c: Classifier, x, y: int, cfg: AttackConfig, *, index: int = 0) -> AttackResult:
    """Projected gradient ascent on ``-y * g`` inside the ``epsilon`` ball around ``x``.

    The first restart starts from ``x`` itself, later restarts from uniform
    random points of the ball. All ``steps`` iterations are run; the
    restart ending at the largest loss is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    queries = 1
    if label_of(c(x)) != y:
        return AttackResult(x.copy(), 0.0, True, queries)
    eps = cfg.epsilon
    if eps == 0:
        return AttackResult(x.copy(), 0.0, False, queries)
    rng = attack_rng(cfg.seed, index)
    best_z, best_g, best_loss = None, 0.0, -np.inf
    for r in range(cfg.restarts):
        z = x.copy() if r == 0 else _random_start(x, eps, cfg.norm, rng)
        for _ in range(cfg.steps):
            direction = -y * gradient(c, z)
            queries += 1
            if cfg.norm == "L2":
                n = np.linalg.norm(direction)
                if n == 0:
                    break
                direction = direction / n
            else:
                direction = np.sign(direction)
            z = _project(z + cfg.step * direction, x, eps, cfg.norm)
        g = float(c(z))
        queries += 1
        if -y * g > best_loss:
            best_z, best_g, best_loss = z, g, -y * g
    success = label_of(best_g) != y
    return AttackResult(best_z, _norm(best_z - x, cfg.norm), bool(success), queries)


def minimal_distance_linear(c: Classifier, x, *, n_probes: int = 4, seed: int = 0, rtol: float = 1e-8) -> float:
    """Exact L2 distance from ``x`` to the decision boundary of an affine classifier.

    Affinity is checked first by probing ``h(a u + b w) = a h(u) + b h(w)``
    for ``h = g - g(0)`` on random ``u, w``.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    d = x.size
    origin = float(c(np.zeros(d)))
    for _ in range(n_probes):
        u, w = rng.standard_normal((2, d))
        a, b = rng.standard_normal(2)
        lhs = float(c(a * u + b * w)) - origin
        hu = float(c(u)) - origin
        hw = float(c(w)) - origin
        rhs = a * hu + b * hw
        scale = max(1.0, abs(a * hu), abs(b * hw), abs(origin))
        if abs(lhs - rhs) > rtol * scale:
            raise NonAffineError("classifier failed the affinity probe")
    grad = gradient(c, x)
    gn = float(np.linalg.norm(grad))
    if gn == 0:
        raise ValueError("classifier has zero gradient")
    return abs(float(c(x))) / gn


def _first_flip(flips, radii, tol: float, *, bracket: bool = False):
    """Locate the smallest flipping radius on ``radii``, then bisect to width ``tol``.

    ``flips(r)`` returns ``(flipped, point)``. The default scans the grid in
    order. ``bracket=True`` instead probes the largest radius and binary
    searches the grid, which assumes flipping is monotone in the radius and
    is much cheaper for expensive probes. Returns ``(radius, point, calls)``
    or ``(None, None, calls)`` when nothing flips.
    """
    calls = 0
    lo = 0.0
    hi = hi_point = None
    if bracket:
        calls += 1
        ok, pt = flips(radii[-1])
        if not ok:
            return None, None, calls
        a, b = -1, len(radii) - 1          # radii[a] does not flip (a=-1 means 0), radii[b] flips
        hi, hi_point = radii[b], pt
        while b - a > 1:
            mid = (a + b) // 2
            calls += 1
            ok, pt = flips(radii[mid])
            if ok:
                b, hi, hi_point = mid, radii[mid], pt
            else:
                a = mid
        lo = 0.0 if a < 0 else radii[a]
    else:
        for r in radii:
            calls += 1
            ok, pt = flips(r)
            if ok:
                hi, hi_point = r, pt
                break
            lo = r
        if hi is None:
            return None, None, calls
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        calls += 1
        ok, pt = flips(mid)
        if ok:
            hi, hi_point = mid, pt
        else:
            lo = mid
    return hi, hi_point, calls


def minimal_distance_search(
    c: Classifier,
    x,
    y: int,
    direction_strategy: str = "gradient",
    max_radius: float = 4.0,
    *,
    tol: float = 1e-7,
    n_grid: int = 64,
    pgd_steps: int = 10,
    index: int = 0,
    seed: int = 0,
) -> AttackResult:
    """Smallest L2 radius at which the label of ``x`` can be flipped.

    ``"gradient"`` walks along the unit direction ``-y * grad g(x)``;
    ``"pgd"`` instead asks whether an L2 PGD attack of each radius succeeds,
    which re-aims the direction as the radius grows; ``"gradient+pgd"``
    runs the gradient walk and falls back to PGD only when the walk finds no
    flip. Gradient radii are scanned in order on a geometric grid up to
    ``max_radius``; PGD radii are located by binary search on the same grid.
    The first flipping bracket is then bisected to ``tol``. The returned
    radius always flips, so it is an upper bound on the true minimal
    distance (tight for affine ``g``).
    """
    x = np.asarray(x, dtype=np.float64)
    if direction_strategy not in ("gradient", "pgd", "gradient+pgd"):
        raise ValueError(f"unknown direction strategy {direction_strategy!r}")
    if label_of(c(x)) != y:
        return AttackResult(x.copy(), 0.0, True, 1)
    radii = np.geomspace(max_radius * 1e-6, max_radius, n_grid)
    queries = 1
    radius = point = None
    if direction_strategy != "pgd":
        g = gradient(c, x)
        gn = np.linalg.norm(g)
        queries += 1
        if gn > 0:
            u = -y * g / gn

            def along(r):
                z = x + r * u
                return label_of(c(z)) != y, z

            radius, point, calls = _first_flip(along, radii, tol)
            queries += calls
    if radius is None and direction_strategy != "gradient":

        def by_pgd(r):
            res = pgd(c, x, y, AttackConfig("L2", float(r), steps=pgd_steps, seed=seed), index=index)
            return res.success, res.adversarial_point

        radius, point, calls = _first_flip(by_pgd, radii, tol, bracket=True)
        queries += calls * (pgd_steps + 2)
    if radius is None:
        return AttackResult(x.copy(), 0.0, False, queries)
    return AttackResult(point, float(np.linalg.norm(point - x)), True, queries)


def robust_accuracy(c: Classifier, data: LabeledSet, cfg: AttackConfig) -> float:
    """Fraction of points still correctly classified after a PGD attack.

    Misclassified clean points count as failures; with ``epsilon = 0`` this
    is the clean accuracy.
    """
    X, Y = data.points, data.labels
    robust = 0
    for i, (x, y) in enumerate(zip(X, Y)):
        y = int(y)
        if label_of(c(x)) != y:
            continue
        if not pgd(c, x, y, cfg, index=i).success:
            robust += 1
    return robust / len(X)
