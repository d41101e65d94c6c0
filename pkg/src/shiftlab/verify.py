"""Self-check suite behind ``shiftlab verify``.

Every check is a small, deterministic property test of one module. Checks
take a :class:`Context` so that faults can be injected to prove the harness
actually fails when an invariant breaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import attacks, datagen, experiments, highdim, kernels, margin, nets, signals

__all__ = ["CheckResult", "Context", "CHECKS", "run_checks"]


@dataclass(frozen=True)
class Context:
    ntk: Callable = kernels.ntk_fc


def faulty_context() -> Context:
    """Context whose FC-NTK is deliberately asymmetric in its arguments."""

    def broken(z, x):
        z = np.asarray(z, dtype=np.float64)
        return kernels.ntk_fc(z, x) * (1.0 + 0.1 * np.tanh(z[..., 0]))

    return Context(ntk=broken)


@dataclass(frozen=True)
class CheckResult:
    name: str
    module: str
    passed: bool
    detail: str


CHECKS: list[tuple[str, str, Callable[[Context], tuple[bool, str]]]] = []


def check(module: str):
    def register(fn):
        CHECKS.append((fn.__name__.removeprefix("check_"), module, fn))
        return fn

    return register


def _rel(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# --- signals -----------------------------------------------------------------

@check("signals")
def check_shift_composition(ctx):
    rng = np.random.default_rng(0)
    worst = 0.0
    for d in (1, 2, 7, 16):
        x = rng.standard_normal(d)
        for s in range(d):
            for t in range(d):
                lhs = signals.circular_shift(signals.circular_shift(x, s), t)
                worst = max(worst, _rel(lhs, signals.circular_shift(x, (s + t) % d)))
    return worst == 0.0, f"max deviation {worst:.3g}"


@check("signals")
def check_dc_shift_invariant(ctx):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(12)
    dev = max(abs(signals.dc_component(row) - signals.dc_component(x)) for row in signals.shift_orbit(x))
    return dev <= 1e-12, f"max deviation {dev:.3g}"


# --- margin ------------------------------------------------------------------

@check("margin")
def check_dot_margins(ctx):
    worst = 0.0
    for d in (4, 16, 64, 256):
        data = datagen.dots(d)
        plain = margin.oracle_max_margin(data.class_pos, data.class_neg, max_dim=d, check_unique=False).margin
        orbit = margin.orbit_margin(data).margin
        worst = max(worst, abs(plain - 2.0), abs(orbit - 2.0 / math.sqrt(d)))
    return worst <= 1e-12, f"max deviation {worst:.3g}"


@check("margin")
def check_orbit_matches_oracle(ctx):
    worst = 0.0
    for seed in range(10):
        data = experiments.random_margin_instance(seed)
        orb = data.orbits()
        rep = margin.oracle_max_margin(orb.class_pos, orb.class_neg, check_unique=False)
        worst = max(worst, abs(rep.margin - margin.orbit_margin(data).margin))
    return worst <= 1e-4, f"max deviation {worst:.3g} over 10 instances"


# --- kernels -----------------------------------------------------------------

def _pairs(seed, count, d):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, d)), rng.standard_normal((count, d))


@check("kernels")
def check_ntk_symmetry(ctx):
    Z, X = _pairs(2, 200, 6)
    dev = max(abs(float(ctx.ntk(z, x)) - float(ctx.ntk(x, z))) for z, x in zip(Z, X))
    return dev <= 1e-12, f"max |k(z,x) - k(x,z)| {dev:.3g}"


@check("kernels")
def check_antipodal_identity(ctx):
    Z, X = _pairs(3, 1000, 5)
    dev = max(abs(float(ctx.ntk(z, x)) - float(ctx.ntk(z, -x)) - 2 * z @ x) for z, x in zip(Z, X))
    return dev <= 1e-10, f"max deviation {dev:.3g}"


@check("kernels")
def check_gram_psd(ctx):
    X = np.random.default_rng(4).standard_normal((12, 8))
    worst = math.inf
    for kind in (kernels.FC_NTK, kernels.KernelKind.cntk(3)):
        H = kernels.gram(kind, X).entries
        worst = min(worst, float(np.linalg.eigvalsh(H).min() / np.max(np.diag(H))))
    return worst >= -1e-8, f"min eigenvalue / max diag {worst:.3g}"


@check("kernels")
def check_interpolation(ctx):
    X = np.random.default_rng(5).standard_normal((10, 8))
    y = np.where(np.arange(10) % 2 == 0, 1.0, -1.0)
    model = kernels.ridge_fit(kernels.KernelKind.cntk(4), X, y)
    res = model.residual()
    return res <= 1e-8, f"residual {res:.3g}"


@check("kernels")
def check_cntk_double_shift(ctx):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        z, x = rng.standard_normal((2, 9))
        s, t = (int(v) for v in rng.integers(0, 9, size=2))
        base = kernels.cntk_gap(z, x, 4)
        worst = max(worst, abs(kernels.cntk_gap(signals.circular_shift(z, s), signals.circular_shift(x, t), 4) - base))
    return worst <= 1e-10, f"max deviation {worst:.3g}"


# --- nets --------------------------------------------------------------------

@check("nets")
def check_conv_invariance(ctx):
    worst = 0.0
    for seed in range(10):
        net = nets.init_normal("conv", 10, 32, seed, q=4)
        x = np.random.default_rng([seed, 9]).standard_normal(10)
        f = nets.forward(net, x)
        for s in range(10):
            worst = max(worst, abs(nets.forward(net, signals.circular_shift(x, s)) - f) / (1 + abs(f)))
    return worst <= 1e-9, f"max relative deviation {worst:.3g}"


@check("nets")
def check_net_input_gradients(ctx):
    worst = 0.0
    for arch, seed in (("fc", 0), ("conv", 1)):
        net = nets.init_normal(arch, 8, 16, seed, q=3)
        c = nets.net_classifier(net)
        x = np.random.default_rng(seed).standard_normal(8)
        g = attacks.gradient(c, x)
        fd = attacks.finite_difference_gradient(c, x)
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)))
    return worst <= 1e-4, f"max relative error {worst:.3g}"


@check("nets")
def check_symmetric_init_zero(ctx):
    net = nets.init_normal("fc", 6, 20, 3, symmetric=True)
    out = np.abs(nets.forward(net, np.random.default_rng(0).standard_normal((5, 6)))).max()
    return out <= 1e-12, f"max |f0| {out:.3g}"


# --- attacks -----------------------------------------------------------------

@check("attacks")
def check_search_matches_linear(ctx):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(5):
        w = rng.standard_normal(6)
        c = margin.linear_classifier(w, 0.3)
        x = rng.standard_normal(6)
        y = int(c.label(x))
        exact = attacks.minimal_distance_linear(c, x)
        found = attacks.minimal_distance_search(c, x, y, tol=1e-10).perturbation_norm
        worst = max(worst, abs(found - exact))
    return worst <= 1e-6, f"max deviation {worst:.3g}"


@check("attacks")
def check_pgd_linear_threshold(ctx):
    c = margin.linear_classifier(np.array([1.0, 0.0, 0.0]), 0.0)
    x = np.array([0.5, 1.0, -1.0])
    below = attacks.pgd(c, x, 1, attacks.AttackConfig(epsilon=0.49, steps=20))
    above = attacks.pgd(c, x, 1, attacks.AttackConfig(epsilon=0.51, steps=20))
    ok = (not below.success) and above.success
    return ok, f"eps 0.49 success={below.success}, eps 0.51 success={above.success}"


# --- highdim -----------------------------------------------------------------

@check("highdim")
def check_interpolant_distance(ctx):
    data = highdim.sample_gaussian_dataset(16, 512, 0)
    interp = highdim.min_norm_interpolant(data)
    dist = np.abs(data.X @ interp.w) / interp.norm
    dev = float(np.max(np.abs(dist * interp.norm - 1.0)))
    return dev <= 1e-8 and interp.residual <= 1e-8, f"max |dist*norm - 1| {dev:.3g}"


# --- datagen -----------------------------------------------------------------

@check("datagen")
def check_orthonormal_sets(ctx):
    worst = 0.0
    for data in (datagen.orth_vectors(4, 32, 0), datagen.orth_frequencies(3, 32)):
        X = data.points
        worst = max(worst, _rel(X @ X.T, np.eye(len(X))))
    return worst <= 1e-12, f"max |X X^T - I| {worst:.3g}"


@check("datagen")
def check_common_margin(ctx):
    worst = 0.0
    c1, c2, _, _ = datagen.common_component_parts(3, 16, 0)
    witness = (c1 - c2) / math.sqrt(2)
    for p in (0.0, 0.1, 0.3):
        data = datagen.common_component(3, 16, p, 0)
        gap = margin.functional_margin(data.class_pos, data.class_neg, witness)
        worst = max(worst, abs(gap - math.sqrt(2) * p))
    return worst <= 1e-12, f"max deviation {worst:.3g}"


# --- experiments -------------------------------------------------------------

@check("experiments")
def check_figure1_exact(ctx):
    rep = experiments.run_figure1([16, 64])
    dev = max(max(abs(r["dist_cntk"] - 1 / math.sqrt(r["d"])), abs(r["dist_ntk"] - 1.0)) for r in rep.rows)
    return dev <= 1e-9, f"max deviation {dev:.3g}"


@check("experiments")
def check_conv_consistency(ctx):
    net = nets.init_normal("conv", 12, 16, 0, q=5)
    data = datagen.orth_vectors(3, 12, 0)
    pct = experiments.shift_consistency(nets.net_classifier(net), data, 8, 0).percent
    return pct == 100.0, f"consistency {pct}"


def run_checks(filter: str | None = None, *, break_ntk_symmetry: bool = False) -> list[CheckResult]:
    """Run the registered checks whose module or check name equals ``filter``."""
    ctx = faulty_context() if break_ntk_symmetry else Context()
    out = []
    for name, module, fn in CHECKS:
        if filter and filter not in (module, name):
            continue
        try:
            passed, detail = fn(ctx)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, module, bool(passed), detail))
    return out
