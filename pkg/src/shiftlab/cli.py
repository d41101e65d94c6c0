"""Command-line front end: ``shiftlab <experiment> [options]``.

Options may also come from a ``key = value`` config file (``--config``);
flags given on the command line win over the file, and the environment
variable ``SHIFTLAB_SEED`` supplies the default seed. Each run writes
``<outdir>/<experiment>.csv`` and, with ``--plots``, ``<experiment>.svg``.

Exit codes: 0 success, 1 experiment error or failed check, 2 config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__, experiments, verify
from .experiments import ExperimentReport, NetSettings, SearchSettings

__all__ = ["ConfigError", "RunConfig", "parse_config", "dispatch", "main", "format_value", "write_csv", "render_svg"]


class ConfigError(ValueError):
    pass


def _int_list(s):
    return [int(v) for v in _split(s)]


def _float_list(s):
    return [float(v) for v in _split(s)]


def _str_list(s):
    return _split(s)


def _split(s):
    items = [v.strip() for v in str(s).split(",") if v.strip()]
    if not items:
        raise ValueError("empty list")
    return items


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    v = str(s).strip().lower()
    return None if v in ("d", "none", "") else int(v)


def _opt_float(s):
    v = str(s).strip().lower()
    return None if v in ("none", "") else float(v)


_NET_KEYS = {
    "width": (int, 256),
    "q": (_opt_int, None),
    "steps": (int, 200),
    "lr_fraction": (float, 0.5),
    "target_loss": (_opt_float, 1e-3),
}
_SEARCH_KEYS = {
    "strategy": (str, "gradient+pgd"),
    "max_radius": (float, 4.0),
}

# experiment -> key -> (parser, default)
SCHEMAS: dict[str, dict] = {
    "figure1": {
        "dims": (_int_list, [16, 64, 256, 1024]),
        "q": (_opt_int, None),
        "nets": (_bool, False),
        "width": (int, 4096),
        "steps": (int, 2000),
        "lr_fraction": (float, 0.5),
        "target_loss": (_opt_float, 1e-4),
    },
    "margin": {
        "dims": (_int_list, [4, 16, 64, 256]),
        "n_seeds": (int, 10),
        "oracle_max_dim": (int, 16),
    },
    "synthetic": {
        "kinds": (_str_list, ["orth_vectors", "orth_frequencies"]),
        "ns": (_int_list, [16]),
        "d": (int, 256),
        "models": (_str_list, ["fc_net", "conv_net"]),
        "n_seeds": (int, 5),
        **_NET_KEYS,
        "lr_fraction": (float, 1.0),
        **_SEARCH_KEYS,
    },
    "common": {
        "ns": (_int_list, [16, 32]),
        "d": (int, 256),
        "ps": (_float_list, [0.0, 0.1, 0.2, 0.3]),
        "n_seeds": (int, 5),
        **_NET_KEYS,
        "width": (int, 1024),
        **_SEARCH_KEYS,
    },
    "highdim": {
        "d": (int, 4096),
        "ns": (_int_list, [64]),
        "n_seeds": (int, 10),
    },
    "consistency": {
        "kinds": (_str_list, ["orth_vectors", "orth_frequencies"]),
        "n": (int, 4),
        "d": (int, 32),
        "n_seeds": (int, 3),
        "trials": (int, 16),
        **_NET_KEYS,
    },
    "verify": {
        "filter": (str, ""),
        "break_ntk_symmetry": (_bool, False),
    },
}
_COMMON_KEYS = {"seed": (int, 0), "threads": (int, 1), "outdir": (str, "."), "plots": (_bool, False)}


@dataclass
class RunConfig:
    experiment: str
    values: dict = field(default_factory=dict)
    outdir: Path = Path(".")
    seed: int = 0
    emit_plots: bool = False
    threads: int = 1


def _read_config_file(path) -> list[tuple[int, str, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: malformed line, expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: missing key")
        entries.append((lineno, key, value))
    return entries


def parse_config(experiment: str, config_file=None, overrides: dict | None = None, env=None) -> RunConfig:
    """Resolve defaults, then the config file, then ``overrides`` (raw strings from flags)."""
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    env = os.environ if env is None else env
    schema = {**SCHEMAS[experiment], **_COMMON_KEYS}
    raw: dict[str, tuple[str, str]] = {}   # key -> (value, origin)
    if "SHIFTLAB_SEED" in env:
        raw["seed"] = (env["SHIFTLAB_SEED"], "SHIFTLAB_SEED")
    if config_file is not None:
        for lineno, key, value in _read_config_file(config_file):
            if key not in schema:
                raise ConfigError(f"{config_file}:{lineno}: unknown key '{key}'")
            raw[key] = (value, f"{config_file}:{lineno}")
    for key, value in (overrides or {}).items():
        if key not in schema:
            raise ConfigError(f"unknown option '{key}'")
        raw[key] = (value, f"--{key.replace('_', '-')}")

    values = {}
    for key, (parser, default) in schema.items():
        if key in raw:
            value, origin = raw[key]
            try:
                values[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{origin}: bad value {value!r} for '{key}': {exc}") from None
        else:
            values[key] = default
    if values["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    for key in ("n_seeds", "trials", "width", "steps"):
        if key in values and values[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    outdir = Path(values.pop("outdir"))
    seed = values.pop("seed")
    plots = values.pop("plots")
    threads = values.pop("threads")
    return RunConfig(experiment, values, outdir, seed, plots, threads)


# --- output --------------------------------------------------------------------

def format_value(v) -> str:
    """Locale-independent text for one CSV cell; floats carry 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    if is_dataclass(v):
        return " ".join(f"{k}={format_value(x)}" for k, x in asdict(v).items())
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


def _provenance(cfg: RunConfig) -> list[str]:
    resolved = "; ".join(f"{k}={format_value(cfg.values[k])}" for k in sorted(cfg.values))
    return [
        f"# shiftlab {__version__}",
        f"# experiment: {cfg.experiment}",
        f"# config: {resolved}",
        f"# seed: {cfg.seed}",
    ]


def write_csv(report: ExperimentReport, cfg: RunConfig, path) -> None:
    lines = _provenance(cfg)
    lines.append(",".join(report.columns))
    for row in report.rows:
        lines.append(",".join(format_value(row.get(c)) for c in report.columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# experiment -> (x column, y columns, grouping columns, row filter)
PLOTS = {
    "figure1": ("d", ("dist_ntk", "dist_cntk"), (), {}),
    "margin": ("d", ("margin_plain", "margin_orbit"), (), {"kind": "dots"}),
    "synthetic": ("n", ("distance",), ("kind", "model"), {}),
    "common": ("p", ("distance", "margin"), ("n",), {}),
    "highdim": ("n", ("norm", "norm_predicted"), (), {}),
    "consistency": ("seed", ("consistency_probe",), ("kind", "model"), {}),
    "verify": None,
}


def _series(report: ExperimentReport, spec):
    """Median over seeds of each y column per group, as sorted ``(x, y)`` lists."""
    xcol, ycols, groups, where = spec
    rows = [r for r in report.rows if all(r.get(k) == v for k, v in where.items())]
    out = {}
    for ycol in ycols:
        keys = sorted({tuple(r[g] for g in groups) for r in rows})
        for key in keys:
            sel = [r for r in rows if tuple(r[g] for g in groups) == key]
            xs = sorted({float(r[xcol]) for r in sel})
            pts = []
            for x in xs:
                ys = [float(r[ycol]) for r in sel if float(r[xcol]) == x]
                ys = [y for y in ys if math.isfinite(y)]
                if ys:
                    pts.append((x, float(np.median(ys))))
            label = " ".join([ycol, *map(str, key)])
            if pts:
                out[label] = pts
    return out


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_svg(report: ExperimentReport, spec, width: int = 640, height: int = 420) -> str:
    """Minimal static line plot; log-log axes when every plotted value is positive."""
    series = _series(report, spec)
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    loglog = min(xs) > 0 and min(ys) > 0
    tx = (lambda v: math.log10(v)) if loglog else float
    lo_x, hi_x = tx(min(xs)), tx(max(xs))
    lo_y, hi_y = tx(min(ys)), tx(max(ys))
    if hi_x == lo_x:
        lo_x, hi_x = lo_x - 1, hi_x + 1
    if hi_y == lo_y:
        lo_y, hi_y = lo_y - 1, hi_y + 1
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (tx(x) - lo_x) / (hi_x - lo_x) * pw

    def py(y):
        return top + ph - (tx(y) - lo_y) / (hi_y - lo_y) * ph

    scale = "log-log" if loglog else "linear"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">{spec[0]} ({scale})</text>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{report.name}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        vx = lo_x + frac * (hi_x - lo_x)
        vy = lo_y + frac * (hi_y - lo_y)
        lx = 10 ** vx if loglog else vx
        ly = 10 ** vy if loglog else vy
        parts.append(f'<text x="{left + frac * pw:.1f}" y="{top + ph + 16}" text-anchor="middle" '
                     f'font-size="11">{lx:.4g}</text>')
        parts.append(f'<text x="{left - 6}" y="{top + ph - frac * ph + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{ly:.4g}</text>')
    for i, (label, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{left + 10}" y="{top + 14 + 15 * i}" font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- dispatch ------------------------------------------------------------------

def _seeds(cfg: RunConfig):
    return list(range(cfg.seed, cfg.seed + cfg.values["n_seeds"]))


def _net_settings(v) -> NetSettings:
    return NetSettings(width=v["width"], q=v["q"], lr_fraction=v["lr_fraction"], steps=v["steps"],
                       target_loss=v["target_loss"])


def _search_settings(v) -> SearchSettings:
    return SearchSettings(strategy=v["strategy"], max_radius=v["max_radius"])


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    v, t = cfg.values, cfg.threads
    name = cfg.experiment
    if name == "figure1":
        nets = _net_settings(v) if v["nets"] else None
        return experiments.run_figure1(v["dims"], v["q"], cfg.seed, nets, threads=t)
    if name == "margin":
        return experiments.run_margin(v["dims"], _seeds(cfg), oracle_max_dim=v["oracle_max_dim"], threads=t)
    if name == "synthetic":
        return experiments.run_synthetic(v["kinds"], v["ns"], v["d"], v["models"], _seeds(cfg),
                                         _net_settings(v), _search_settings(v), threads=t)
    if name == "common":
        return experiments.run_common_component(v["ns"], v["d"], v["ps"], _seeds(cfg), _net_settings(v),
                                                _search_settings(v), threads=t)
    if name == "highdim":
        return experiments.run_highdim(v["d"], v["ns"], _seeds(cfg), threads=t)
    if name == "consistency":
        return experiments.run_consistency(v["kinds"], v["n"], v["d"], _seeds(cfg), v["trials"],
                                           _net_settings(v), threads=t)
    raise ConfigError(f"unknown experiment {name!r}")


def _verify_report(cfg: RunConfig) -> tuple[ExperimentReport, bool]:
    results = verify.run_checks(cfg.values["filter"] or None,
                                break_ntk_symmetry=cfg.values["break_ntk_symmetry"])
    rows = [{"module": r.module, "check": r.name, "status": "pass" if r.passed else "FAIL",
             "detail": r.detail.replace(",", ";"), "seed": cfg.seed} for r in results]
    width = max((len(r["module"]) + len(r["check"]) for r in rows), default=10) + 3
    for r in rows:
        print(f"{r['module'] + '.' + r['check']:<{width}} {r['status']:<5} {r['detail']}")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    report = ExperimentReport("verify", dict(cfg.values), ("module", "check", "status", "detail", "seed"), rows)
    return report, bool(results) and passed == len(results)


def dispatch(cfg: RunConfig) -> int:
    """Run one experiment and write its outputs; returns the process exit status."""
    outdir = cfg.outdir
    if not outdir.is_dir() or not os.access(outdir, os.W_OK):
        print(f"error: output directory {outdir} does not exist or is not writable", file=sys.stderr)
        return 2
    csv_path = outdir / f"{cfg.experiment}.csv"
    svg_path = outdir / f"{cfg.experiment}.svg"
    written = []
    try:
        if cfg.experiment == "verify":
            report, ok = _verify_report(cfg)
        else:
            report, ok = run_experiment(cfg), True
        write_csv(report, cfg, csv_path)
        written.append(csv_path)
        spec = PLOTS.get(cfg.experiment)
        if cfg.emit_plots and spec is not None:
            _atomic_write(svg_path, render_svg(report, spec))
            written.append(svg_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        for path in written:
            path.unlink(missing_ok=True)
        print(f"error: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not ok:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftlab", description="Shift-invariance and robustness experiments.")
    parser.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment" if name != "verify" else "run the self-check suite")
        p.add_argument("--config", help="key = value file; flags override it")
        for key in {**schema, **_COMMON_KEYS}:
            if key == "break_ntk_symmetry":
                p.add_argument("--break-ntk-symmetry", dest=key, action="store_const", const="true",
                               default=None, help=argparse.SUPPRESS)
            elif key == "plots":
                p.add_argument("--plots", dest=key, action="store_const", const="true", default=None,
                               help="also write an SVG plot")
            else:
                p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, metavar="VALUE")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    raw = {k: v for k, v in vars(args).items() if k not in ("experiment", "config") and v is not None}
    try:
        cfg = parse_config(args.experiment, args.config, raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
