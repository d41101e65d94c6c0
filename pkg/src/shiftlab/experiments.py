"""Metrics and named experiment pipelines.

Each ``run_*`` function returns an :class:`ExperimentReport` whose rows are
plain dicts. Work is fanned out over (setting, seed) pairs on a thread pool;
every task builds its own generators from the seed, and the rows are merged
in a canonical order, so reports do not depend on the worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attacks import minimal_distance_linear, minimal_distance_search
from .classifier import Classifier, label_of
from .datagen import common_component, common_component_parts, dots, orth_frequencies, orth_vectors
from .highdim import (
    epsilon_adversarial,
    epsilon_threshold_prediction,
    gradient_norm_prediction,
    min_norm_interpolant,
    orthogonality_stats,
    sample_gaussian_dataset,
)
from .kernels import antipodal_cntk_classifier, antipodal_ntk_classifier
from .margin import LabeledSet, functional_margin, oracle_max_margin, orbit_margin
from .nets import (
    TrainConfig,
    TrainingDivergedError,
    forward,
    init_normal,
    net_classifier,
    suggest_learning_rate,
    train_full_batch,
)
from .signals import dc_component

__all__ = [
    "ConsistencyReport",
    "ExperimentReport",
    "NetSettings",
    "SearchSettings",
    "shift_consistency",
    "mean_adv_distance",
    "train_classifier",
    "random_margin_instance",
    "run_figure1",
    "run_margin",
    "run_synthetic",
    "run_common_component",
    "run_highdim",
    "run_consistency",
]


@dataclass(frozen=True)
class ConsistencyReport:
    percent: float
    trials: int
    seed: int
    matches: int
    total: int


@dataclass
class ExperimentReport:
    """Named table of result rows; every row has a ``seed`` entry."""

    name: str
    parameters: dict
    columns: tuple
    rows: list = field(default_factory=list)
    wall_time: float = 0.0

    def column(self, key, **where) -> np.ndarray:
        """Values of ``key`` over the rows matching every ``where`` filter."""
        sel = [r[key] for r in self.rows if all(r.get(k) == v for k, v in where.items())]
        return np.array(sel, dtype=float)

    def median(self, key, **where) -> float:
        vals = self.column(key, **where)
        # nan marks diverged runs; inf (no flip found) still counts as large
        vals = vals[~np.isnan(vals)]
        return float(np.median(vals)) if vals.size else math.nan


@dataclass(frozen=True)
class NetSettings:
    """How to build and train a finite network for an experiment.

    ``q=None`` means full-length filters. ``lr_fraction`` scales the
    step size ``n / lambda_max`` of the initial empirical tangent kernel.
    """

    width: int = 1024
    q: int | None = None
    lr_fraction: float = 0.5
    steps: int = 200
    target_loss: float | None = 1e-3
    symmetric: bool = True


@dataclass(frozen=True)
class SearchSettings:
    strategy: str = "gradient+pgd"
    max_radius: float = 4.0
    tol: float = 1e-7


def shift_consistency(c: Classifier, data: LabeledSet, trials: int, seed: int) -> ConsistencyReport:
    """Percentage of (sample, random shift) draws on which the predicted label is unchanged."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    X = data.points
    n, d = X.shape
    rng = np.random.default_rng(seed)
    shifts = rng.integers(0, d, size=(n, trials))
    base = label_of(np.asarray(c(X)))
    idx = (np.arange(d)[None, None, :] + shifts[:, :, None]) % d     # (n, trials, d)
    shifted = X[np.arange(n)[:, None, None], idx].reshape(n * trials, d)
    labels = label_of(np.asarray(c(shifted))).reshape(n, trials)
    matches = int(np.sum(labels == base[:, None]))
    total = n * trials
    return ConsistencyReport(100.0 * matches / total, trials, seed, matches, total)


def mean_adv_distance(c: Classifier, data: LabeledSet, method: str = "search", search: SearchSettings | None = None,
                      seed: int = 0) -> float:
    """Mean over samples of the minimal L2 distance that flips the predicted label.

    ``"exact_linear"`` requires an affine ``c`` (raises
    :class:`~shiftlab.attacks.NonAffineError` otherwise); ``"search"`` runs
    :func:`~shiftlab.attacks.minimal_distance_search`. Misclassified samples
    count as distance zero.
    """
    search = search or SearchSettings()
    dists = []
    for i, (x, y) in enumerate(zip(data.points, data.labels)):
        y = int(y)
        if method == "exact_linear":
            dist = minimal_distance_linear(c, x)
            dists.append(dist if label_of(c(x)) == y else 0.0)
        elif method == "search":
            res = minimal_distance_search(
                c, x, y, search.strategy, search.max_radius, tol=search.tol, index=i, seed=seed
            )
            dists.append(res.perturbation_norm if res.success else math.inf)
        else:
            raise ValueError(f"unknown method {method!r}")
    return float(np.mean(dists))


def train_classifier(arch: str, data: LabeledSet, settings: NetSettings, seed: int):
    """Initialise and train a network; returns ``(classifier, losses, train_accuracy)``."""
    net = init_normal(arch, data.dim, settings.width, seed, q=settings.q, symmetric=settings.symmetric)
    lr = suggest_learning_rate(net, data.points, settings.lr_fraction)
    cfg = TrainConfig(lr, settings.steps, seed=seed, target_loss=settings.target_loss)
    net, losses = train_full_batch(net, data, cfg)
    acc = float(np.mean(label_of(forward(net, data.points)) == data.labels))
    return net_classifier(net), losses, acc


def _fan_out(fn, tasks, threads: int):
    threads = max(1, int(threads))
    if threads == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _finish(name, parameters, columns, rows, started, sort_keys):
    rows = sorted(rows, key=lambda r: tuple(r[k] for k in sort_keys))
    return ExperimentReport(name, parameters, tuple(columns), rows, time.perf_counter() - started)


# --- Figure 1: dot pair, kernels and wide nets -----------------------------

def run_figure1(dims, q: int | None = None, seed: int = 0, nets: NetSettings | None = None,
                search: SearchSettings | None = None, threads: int = 1) -> ExperimentReport:
    """Minimal adversarial distance on the antipodal dot pair as ``d`` grows.

    Exact columns come from the closed-form interpolants; ``*_search``
    columns repeat the measurement by bisection. When ``nets`` is given, an
    FC and a conv network are trained on each pair as well.
    """
    dims = [int(d) for d in dims]
    if not dims:
        raise ValueError("dims must be non-empty")
    search = search or SearchSettings(tol=1e-9)
    started = time.perf_counter()

    def task(d):
        data = dots(d)
        ntk = antipodal_ntk_classifier(data.class_pos[0])
        cntk = antipodal_cntk_classifier(data.class_pos[0], q)
        row = {
            "d": d,
            "seed": seed,
            "dist_ntk": mean_adv_distance(ntk, data, "exact_linear"),
            "dist_cntk": mean_adv_distance(cntk, data, "exact_linear"),
            "dist_ntk_search": mean_adv_distance(ntk, data, "search", search),
            "dist_cntk_search": mean_adv_distance(cntk, data, "search", search),
            "inv_sqrt_d": 1.0 / math.sqrt(d),
        }
        if nets is not None:
            for arch in ("fc", "conv"):
                c, _, _ = train_classifier(arch, data, nets, seed)
                row[f"dist_{arch}_net"] = mean_adv_distance(c, data, "search", search, seed)
        return row

    rows = _fan_out(task, dims, threads)
    columns = ["d", "seed", "dist_ntk", "dist_cntk", "dist_ntk_search", "dist_cntk_search", "inv_sqrt_d"]
    if nets is not None:
        columns += ["dist_fc_net", "dist_conv_net"]
    params = {"dims": dims, "q": "d" if q is None else q, "seed": seed, "nets": nets, "search": search}
    return _finish("figure1", params, columns, rows, started, ("d",))


# --- margins -----------------------------------------------------------------

def random_margin_instance(seed: int, *, max_dim: int = 8, max_per_class: int = 2, min_gap: float = 0.1) -> LabeledSet:
    """Small random two-class set whose DC components are separated by at least ``min_gap``."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, max_dim + 1))
    kp, kn = (int(k) for k in rng.integers(1, max_per_class + 1, size=2))
    P = rng.standard_normal((kp, d))
    N = rng.standard_normal((kn, d))
    gap = float(dc_component(P).min() - dc_component(N).max())
    if gap < min_gap:
        P = P + (min_gap - gap + rng.uniform(0.0, 1.0)) / math.sqrt(d)
    return LabeledSet(P, N)


def run_margin(dims, seeds, *, oracle_max_dim: int = 16, threads: int = 1) -> ExperimentReport:
    """Max-margin separators with and without shift orbits.

    For the dot pair at each ``d``: the plain margin (oracle), the orbit
    margin (closed form) and, for small ``d``, the oracle on the expanded
    orbits. One random small instance per seed compares the closed form
    with the orbit oracle.
    """
    dims = [int(d) for d in dims]
    seeds = [int(s) for s in seeds]
    started = time.perf_counter()
    tasks = [("dots", d, 0) for d in dims] + [("random", 0, s) for s in seeds]

    def task(t):
        kind, d, seed = t
        data = dots(d) if kind == "dots" else random_margin_instance(seed)
        plain = oracle_max_margin(data.class_pos, data.class_neg, max_points=10**6, max_dim=10**6,
                                  check_unique=False)
        orbit = orbit_margin(data)
        orb = data.orbits()
        if data.dim <= oracle_max_dim:
            rep = oracle_max_margin(orb.class_pos, orb.class_neg, max_points=10**6)
            oracle_margin = rep.margin if rep.separable else 0.0
            align = float(np.max(np.abs(np.abs(rep.normal) - 1 / math.sqrt(data.dim)))) if rep.separable else math.nan
            unique = bool(rep.unique)
        else:
            oracle_margin, align, unique = math.nan, math.nan, False
        return {
            "kind": kind,
            "d": data.dim,
            "seed": seed,
            "margin_plain": plain.margin if plain.separable else 0.0,
            "margin_orbit": orbit.margin if orbit.separable else 0.0,
            "margin_orbit_oracle": oracle_margin,
            "normal_dc_deviation": align,
            "oracle_unique": int(unique),
        }

    rows = _fan_out(task, tasks, threads)
    columns = ["kind", "d", "seed", "margin_plain", "margin_orbit", "margin_orbit_oracle",
               "normal_dc_deviation", "oracle_unique"]
    params = {"dims": dims, "seeds": seeds, "oracle_max_dim": oracle_max_dim}
    return _finish("margin", params, columns, rows, started, ("kind", "d", "seed"))


# --- synthetic robustness tables ---------------------------------------------

def _synthetic_data(kind: str, n: int, d: int, seed: int) -> LabeledSet:
    if kind == "orth_vectors":
        return orth_vectors(n, d, seed)
    if kind == "orth_frequencies":
        return orth_frequencies(n, d)
    raise ValueError(f"unknown synthetic dataset {kind!r}")


def _net_row(arch, data, nets, search, seed):
    """Train and attack one network; divergence is recorded instead of raised."""
    try:
        c, losses, acc = train_classifier(arch, data, nets, seed)
    except TrainingDivergedError:
        return {"distance": math.nan, "final_loss": math.nan, "train_accuracy": math.nan,
                "steps": nets.steps, "status": "diverged"}
    return {
        "distance": mean_adv_distance(c, data, "search", search, seed),
        "final_loss": float(losses[-1]),
        "train_accuracy": acc,
        "steps": len(losses) - 1,
        "status": "ok",
    }


def run_synthetic(kinds, ns, d: int, models, seeds, nets: NetSettings | None = None,
                  search: SearchSettings | None = None, threads: int = 1) -> ExperimentReport:
    """Adversarial distance of trained FC and conv nets on orthogonal vectors / frequencies.

    One row per (kind, n, model, seed); seed-level aggregates come from
    :meth:`ExperimentReport.median`. Orthogonal frequencies ignore the seed
    for the data, which then only drives the network initialisation.
    """
    kinds = [kinds] if isinstance(kinds, str) else list(kinds)
    models = [models] if isinstance(models, str) else list(models)
    ns = [int(n) for n in ns]
    seeds = [int(s) for s in seeds]
    nets = nets or NetSettings(width=256, lr_fraction=1.0)
    search = search or SearchSettings()
    for m in models:
        if m not in ("fc_net", "conv_net"):
            raise ValueError(f"unknown model {m!r}")
    started = time.perf_counter()
    tasks = [(k, n, m, s) for k in kinds for n in ns for m in models for s in seeds]

    def task(t):
        kind, n, model, seed = t
        data = _synthetic_data(kind, n, d, seed)
        row = {"kind": kind, "n": n, "model": model, "seed": seed}
        row.update(_net_row(model.removesuffix("_net"), data, nets, search, seed))
        return row

    rows = _fan_out(task, tasks, threads)
    columns = ["kind", "n", "model", "seed", "distance", "final_loss", "train_accuracy", "steps", "status"]
    params = {"kinds": kinds, "ns": ns, "d": d, "models": models, "seeds": seeds, "nets": nets, "search": search}
    return _finish("synthetic", params, columns, rows, started, ("kind", "n", "model", "seed"))


def run_common_component(ns, d: int, ps, seeds, nets: NetSettings | None = None,
                         search: SearchSettings | None = None, threads: int = 1) -> ExperimentReport:
    """FC-net adversarial distance as a shared class component of weight ``p`` is added.

    ``margin`` is the functional gap of the two classes along the witness
    direction ``(c1 - c2) / sqrt(2)``, which equals ``sqrt(2) * p``.
    """
    ns = [int(n) for n in ns]
    ps = [float(p) for p in ps]
    seeds = [int(s) for s in seeds]
    nets = nets or NetSettings()
    search = search or SearchSettings()
    started = time.perf_counter()
    tasks = [(n, p, s) for n in ns for p in ps for s in seeds]

    def task(t):
        n, p, seed = t
        data = common_component(n, d, p, seed)
        c1, c2, _, _ = common_component_parts(n, d, seed)
        witness = (c1 - c2) / math.sqrt(2.0)
        row = {"n": n, "p": p, "seed": seed,
               "margin": functional_margin(data.class_pos, data.class_neg, witness),
               "margin_predicted": math.sqrt(2.0) * p}
        row.update(_net_row("fc", data, nets, search, seed))
        return row

    rows = _fan_out(task, tasks, threads)
    columns = ["n", "p", "seed", "margin", "margin_predicted", "distance", "final_loss", "train_accuracy",
               "steps", "status"]
    params = {"ns": ns, "d": d, "ps": ps, "seeds": seeds, "nets": nets, "search": search}
    return _finish("common", params, columns, rows, started, ("n", "p", "seed"))


# --- high-dimensional linear interpolation -----------------------------------

def run_highdim(d: int, ns, seeds, threads: int = 1) -> ExperimentReport:
    """Minimum-norm linear interpolants of Gaussian data against the heuristic predictions."""
    ns = [int(n) for n in ns]
    seeds = [int(s) for s in seeds]
    for n in ns:
        if n > d:
            raise ValueError(f"need n <= d, got n={n}, d={d}")
    started = time.perf_counter()
    tasks = [(n, s) for n in ns for s in seeds]

    def task(t):
        n, seed = t
        data = sample_gaussian_dataset(n, d, seed)
        row = {"n": n, "seed": seed, "norm_predicted": gradient_norm_prediction(n),
               "threshold_predicted": epsilon_threshold_prediction(n)}
        try:
            interp = min_norm_interpolant(data)
        except ValueError:
            row.update(status="rank_deficient", norm=math.nan, ratio=math.nan, mean_distance=math.nan,
                       distance_times_norm=math.nan, flipped_at_threshold=math.nan, max_abs_inner=math.nan,
                       pair_cosine_mean=math.nan)
            return row
        dists, flipped = [], 0
        eps = row["threshold_predicted"]
        for x, y in zip(data.X, data.y):
            res, dist = epsilon_adversarial(x, int(y), interp.w, eps)
            dists.append(dist)
            flipped += res.success
        stats = orthogonality_stats(data)
        mean_dist = float(np.mean(dists))
        row.update(
            status="ok",
            norm=interp.norm,
            ratio=interp.norm / row["norm_predicted"],
            mean_distance=mean_dist,
            distance_times_norm=mean_dist * interp.norm,
            flipped_at_threshold=flipped / n,
            max_abs_inner=stats["max_abs_inner"],
            pair_cosine_mean=stats["pair_cosine_mean"],
        )
        return row

    rows = _fan_out(task, tasks, threads)
    columns = ["n", "seed", "norm", "norm_predicted", "ratio", "mean_distance", "distance_times_norm",
               "threshold_predicted", "flipped_at_threshold", "max_abs_inner", "pair_cosine_mean", "status"]
    params = {"d": d, "ns": ns, "seeds": seeds}
    return _finish("highdim", params, columns, rows, started, ("n", "seed"))


# --- shift consistency of trained nets ---------------------------------------

def run_consistency(kinds, n: int, d: int, seeds, trials: int = 16, nets: NetSettings | None = None,
                    threads: int = 1) -> ExperimentReport:
    """Shift consistency of trained FC and conv nets, on training signals and fresh Gaussian probes."""
    kinds = [kinds] if isinstance(kinds, str) else list(kinds)
    seeds = [int(s) for s in seeds]
    nets = nets or NetSettings(width=256)
    started = time.perf_counter()
    tasks = [(k, m, s) for k in kinds for m in ("fc_net", "conv_net") for s in seeds]

    def task(t):
        kind, model, seed = t
        data = _synthetic_data(kind, n, d, seed)
        c, _, acc = train_classifier(model.removesuffix("_net"), data, nets, seed)
        probes = np.random.default_rng([seed, 1]).standard_normal((2 * n, d)) / math.sqrt(d)
        probe_set = LabeledSet(probes[:n], probes[n:])
        return {
            "kind": kind,
            "model": model,
            "seed": seed,
            "train_accuracy": acc,
            "consistency_train": shift_consistency(c, data, trials, seed).percent,
            "consistency_probe": shift_consistency(c, probe_set, trials, seed).percent,
        }

    rows = _fan_out(task, tasks, threads)
    columns = ["kind", "model", "seed", "train_accuracy", "consistency_train", "consistency_probe"]
    params = {"kinds": kinds, "n": n, "d": d, "seeds": seeds, "trials": trials, "nets": nets}
    return _finish("consistency", params, columns, rows, started, ("kind", "model", "seed"))
