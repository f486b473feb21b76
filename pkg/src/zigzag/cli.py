"""Command-line front end: ``python -m zigzag {simulate,compare,period,xi,disentangle}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 comparison threshold exceeded, 5 truncation flags present.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exact import DegenerateParametersError, TruncationPolicy, amplitude_grid, make_context, xi_curves
from .grid import CompareReport, GridMismatchError, PropagationGrid, compare_grids, read_grid, write_curves, write_grid
from .integrator import IntegrationError, IntegratorConfig, edge_monitor, integrate
from .lattice import (DEFAULT_SITES, MIN_SITES, DimensionlessParams, HyperbolicRegimeError,
                      LatticeState, PhysicalParams, UnitError, bloch_period, nondimensionalize)
from .su11 import FactorizationError, TripleCoefficients, dense_oracle, disentangle, \
    factored_product_2x2, su11_closed_form_2x2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_THRESHOLD = 4
EXIT_FLAGS = 5

METHODS = ("numeric", "exact", "both", "oracle")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


# key -> (type, default); None default with required=True means mandatory
_KEYS: dict[str, tuple[type, object]] = {
    "lambda": (float, None),
    "alpha_plus": (float, None),
    "alpha_minus": (float, None),
    "beta": (float, None),
    "C": (float, None),
    "C_unit": (str, "1/cm"),
    "alpha0": (float, None),
    "alpha0_unit": (str, "1/cm"),
    "mu": (float, 0.0),
    "mu_unit": (str, "1/cm"),
    "d1": (float, 0.0),
    "d2": (float, 0.0),
    "kappa": (float, 1.0),
    "input_site": (int, None),
    "sites": (int, DEFAULT_SITES),
    "zmax": (float, None),
    "zsamples": (int, 101),
    "m_min": (int, 0),
    "m_max": (int, None),
    "method": (str, "both"),
    "rtol": (float, 1e-10),
    "atol": (float, 1e-12),
    "h0": (float, None),
    "hmax": (float, math.inf),
    "safety": (float, 0.9),
    "tail_tol": (float, 1e-14),
    "consecutive_below": (int, 4),
    "k_max": (int, 400),
    "edge_threshold": (float, 1e-8),
    "threshold": (float, 1e-5),
    "output": (str, "grid"),
    "format": (str, "csv"),
    "allow_flags": (bool, False),
}

_SIM_REQUIRED = ("alpha_plus", "alpha_minus", "beta", "input_site", "zmax")
_XI_REQUIRED = ("alpha_plus", "alpha_minus", "beta", "zmax")


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


@dataclass(frozen=True)
class RunConfig:
    params: DimensionlessParams
    input_site: int
    sites: int
    zmax: float
    zsamples: int
    m_min: int
    m_max: int
    method: str
    integrator: dict
    truncation: TruncationPolicy
    edge_threshold: float
    threshold: float
    output: str
    format: str
    allow_flags: bool
    physical: PhysicalParams | None = None
    z_scale: float | None = None
    raw: dict = field(default_factory=dict)

    @property
    def z_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.zmax, self.zsamples)

    @property
    def m_range(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    def echo(self) -> dict:
        """JSON-safe record of the resolved configuration."""
        out = {k: v for k, v in self.raw.items()}
        out.update({
            "lambda": self.params.lam, "alpha_plus": self.params.alpha_plus,
            "alpha_minus": self.params.alpha_minus, "beta": self.params.beta,
            "input_site": self.input_site, "sites": self.sites, "zmax": self.zmax,
            "zsamples": self.zsamples, "m_min": self.m_min, "m_max": self.m_max,
            "method": self.method, "edge_threshold": self.edge_threshold,
            "threshold": self.threshold, "format": self.format, "allow_flags": self.allow_flags,
            "tail_tol": self.truncation.tail_tol,
            "consecutive_below": self.truncation.consecutive_below,
            "k_max": self.truncation.k_max,
        })
        out.update({k: v for k, v in self.integrator.items()})
        if self.z_scale is not None:
            out["z_scale_per_cm"] = self.z_scale
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in out.items()}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _coerce(key: str, value, where: str):
    typ = _KEYS[key][0]
    if value is None:
        return None
    try:
        if typ is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
                return value.lower() in ("true", "1")
            raise TypeError
        if typ is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if typ is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if not isinstance(value, str):
            raise TypeError
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: {key} expects {typ.__name__}, got {value!r}") from None


def load_config_file(path) -> tuple[dict, dict]:
    """Read a flat JSON config; returns values and the line number of each key."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: config must be a flat JSON object")
    values, where = {}, {}
    for key, value in doc.items():
        line = _line_of(text, key)
        loc = f"{path}:{line}" if line else str(path)
        if key not in _KEYS:
            raise ConfigError(f"{loc}: unknown key {key!r}")
        if isinstance(value, (dict, list)):
            raise ConfigError(f"{loc}: {key} must be a scalar (config is flat)")
        values[key] = _coerce(key, value, loc)
        where[key] = loc
    return values, where


def parse_config(file_values: dict | None = None, flag_values: dict | None = None,
                 where: dict | None = None, required=_SIM_REQUIRED) -> RunConfig:
    """Merge config-file values with flags (flags win) and validate.

    Raises
    ------
    ConfigError
        With the file line or flag name of the offending entry.
    """
    merged: dict = {}
    where = dict(where or {})
    for key, value in (file_values or {}).items():
        merged[key] = value
    for key, value in (flag_values or {}).items():
        if value is not None:
            if key not in _KEYS:
                raise ConfigError(f"unknown option {_flag(key)}")
            merged[key] = _coerce(key, value, _flag(key))
            where[key] = _flag(key)

    def loc(key):
        return where.get(key, _flag(key))

    have_lambda = merged.get("lambda") is not None
    have_phys = merged.get("C") is not None or merged.get("alpha0") is not None
    missing = [k for k in required if merged.get(k) is None]
    if not have_lambda and not have_phys:
        missing.insert(0, "lambda (or C and alpha0)")
    elif have_phys and (merged.get("C") is None or merged.get("alpha0") is None):
        missing.append("C" if merged.get("C") is None else "alpha0")
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    def get(key):
        v = merged.get(key)
        return _KEYS[key][1] if v is None else v

    physical = z_scale = None
    try:
        if have_phys:
            physical = PhysicalParams(
                C=get("C"), alpha0=get("alpha0"), alpha_plus=get("alpha_plus"),
                alpha_minus=get("alpha_minus"), beta=get("beta"), mu=get("mu"),
                d1=get("d1"), d2=get("d2"), kappa=get("kappa"), C_unit=get("C_unit"),
                alpha0_unit=get("alpha0_unit"), mu_unit=get("mu_unit"))
            params, z_scale = nondimensionalize(physical)
            if have_lambda and abs(params.lam - merged["lambda"]) > 1e-12 * max(1.0, abs(params.lam)):
                raise ConfigError(
                    f"{loc('lambda')}: lambda={merged['lambda']} disagrees with alpha0/C = "
                    f"{params.lam:.15g} (check {loc('alpha0_unit')} / {loc('C_unit')})")
        else:
            params = DimensionlessParams(get("lambda"), get("alpha_plus"), get("alpha_minus"), get("beta"))
    except UnitError as exc:
        key = "alpha0_unit" if "alpha0" in str(exc) else ("C_unit" if str(exc).startswith("C") else "mu_unit")
        raise ConfigError(f"{loc(key)}: {exc}") from None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from None

    sites = get("sites")
    if sites < MIN_SITES:
        raise ConfigError(f"{loc('sites')}: sites must be >= {MIN_SITES}, got {sites}")
    input_site = get("input_site")
    if input_site is not None and not 0 <= input_site < sites:
        raise ConfigError(f"{loc('input_site')}: input_site must satisfy 0 <= n < sites={sites}, got {input_site}")
    zmax = get("zmax")
    if zmax is not None and not (zmax > 0 and math.isfinite(zmax)):
        raise ConfigError(f"{loc('zmax')}: zmax must be positive, got {zmax}")
    zsamples = get("zsamples")
    if zsamples < 2:
        raise ConfigError(f"{loc('zsamples')}: zsamples must be >= 2, got {zsamples}")
    m_min = get("m_min")
    m_max = get("m_max") if merged.get("m_max") is not None else sites - 1
    if not 0 <= m_min <= m_max:
        raise ConfigError(f"{loc('m_max')}: need 0 <= m_min <= m_max, got {m_min}..{m_max}")
    method = get("method")
    if method not in METHODS:
        raise ConfigError(f"{loc('method')}: method must be one of {', '.join(METHODS)}, got {method!r}")
    if method in ("numeric", "both", "oracle") and m_max >= sites:
        raise ConfigError(f"{loc('m_max')}: m_max={m_max} must be < sites={sites} for method {method}")
    fmt = get("format")
    if fmt not in FORMATS:
        raise ConfigError(f"{loc('format')}: format must be csv or json, got {fmt!r}")

    integ = {k: get(k) for k in ("rtol", "atol", "h0", "hmax", "safety")}
    try:
        IntegratorConfig(np.array([0.0, 1.0]), **integ)
        truncation = TruncationPolicy(get("tail_tol"), get("consecutive_below"), get("k_max"))
        if input_site is not None:
            truncation.check_indices(input_site, m_max)
    except ValueError as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from None
    for key in ("edge_threshold", "threshold"):
        if not get(key) > 0:
            raise ConfigError(f"{loc(key)}: {key} must be positive")

    return RunConfig(
        params=params, input_site=input_site, sites=sites, zmax=zmax, zsamples=zsamples,
        m_min=m_min, m_max=m_max, method=method, integrator=integ, truncation=truncation,
        edge_threshold=get("edge_threshold"), threshold=get("threshold"),
        output=get("output"), format=fmt, allow_flags=bool(get("allow_flags")),
        physical=physical, z_scale=z_scale, raw={k: v for k, v in merged.items()},
    )


# ---------------------------------------------------------------------------
# orchestration

def simulate_numeric(cfg: RunConfig) -> PropagationGrid:
    initial = LatticeState.single_site(cfg.input_site, cfg.sites)
    icfg = IntegratorConfig(cfg.z_grid, **cfg.integrator)
    traj = integrate(initial, cfg.params, icfg)
    edge = edge_monitor(traj, cfg.edge_threshold)
    values = traj.amplitudes[:, cfg.m_min:cfg.m_max + 1]
    flags = np.repeat((edge.ratios > cfg.edge_threshold)[:, None], values.shape[1], axis=1)
    meta = {
        "method": "numeric",
        "integrator": asdict(traj.stats),
        "edge_worst_ratio": edge.worst_ratio,
        "edge_flagged": edge.flagged,
    }
    return PropagationGrid(cfg.z_grid, cfg.m_range, values, flags, meta)


def simulate_exact(cfg: RunConfig, workers: int | None = None) -> PropagationGrid:
    ctx = make_context(cfg.params)
    values, flags = amplitude_grid(cfg.input_site, cfg.z_grid, cfg.m_range, ctx,
                                   cfg.truncation, workers)
    meta = {
        "method": "exact",
        "gamma_sq": ctx.gamma_sq,
        "zeta_plus": ctx.zeta_plus,
        "zeta_minus": ctx.zeta_minus,
        "f": ctx.f_const,
        "truncated_cells": int(flags.sum()),
    }
    return PropagationGrid(cfg.z_grid, cfg.m_range, values, flags, meta)


def simulate_oracle(cfg: RunConfig) -> PropagationGrid:
    rows = [dense_oracle(cfg.params, cfg.sites, z).column(cfg.input_site)[cfg.m_min:cfg.m_max + 1]
            for z in cfg.z_grid]
    return PropagationGrid(cfg.z_grid, cfg.m_range, np.array(rows), None,
                           {"method": "oracle", "dim": cfg.sites})


def _output_path(cfg: RunConfig, tag: str | None) -> Path:
    base = Path(cfg.output)
    if base.suffix.lower() == "." + cfg.format:
        stem, suffix = base.with_suffix(""), base.suffix
    else:
        stem, suffix = base, "." + cfg.format
    name = stem.name + (f".{tag}" if tag else "") + suffix
    return stem.with_name(name)


def run_simulate(cfg: RunConfig, out=None) -> tuple[int, dict[str, PropagationGrid], CompareReport | None]:
    """Run the configured method(s), write grids and print a summary."""
    out = out or sys.stdout
    start = time.perf_counter()
    grids: dict[str, PropagationGrid] = {}
    methods = ("numeric", "exact") if cfg.method == "both" else (cfg.method,)
    builders = {"numeric": simulate_numeric, "exact": simulate_exact, "oracle": simulate_oracle}
    try:
        for method in methods:
            t0 = time.perf_counter()
            grid = builders[method](cfg)
            grid.meta.update(config=cfg.echo(), version=__version__,
                             wall_time_s=time.perf_counter() - t0)
            grids[method] = grid
    except (IntegrationError, DegenerateParametersError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, grids, None

    report = None
    if cfg.method == "both":
        report = compare_grids(grids["exact"], grids["numeric"], cfg.threshold, "rel_l2")

    single = len(grids) == 1
    for method, grid in grids.items():
        path = write_grid(grid, _output_path(cfg, None if single else method), cfg.format)
        power = grid.total_power
        print(f"{method}: wrote {path} ({grid.z.size} x {grid.m.size} cells); "
              f"total intensity {power[0]:.6g} -> {power[-1]:.6g}", file=out)
        if grid.any_flagged:
            print(f"{method}: {int(grid.flags.sum())} cell(s) flagged for truncation", file=out)
    if report is not None:
        rpath = _output_path(cfg, "compare").with_suffix(".json")
        rpath.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(report.summary(), file=out)
    print(f"done in {time.perf_counter() - start:.2f} s", file=out)

    if report is not None and not report.passed:
        return EXIT_THRESHOLD, grids, report
    if any(g.any_flagged for g in grids.values()) and not cfg.allow_flags:
        return EXIT_FLAGS, grids, report
    return EXIT_OK, grids, report


def run_compare(path_a, path_b, threshold: float, metric: str = "rel_l2", out=None) -> tuple[int, CompareReport]:
    out = out or sys.stdout
    report = compare_grids(read_grid(path_a), read_grid(path_b), threshold, metric)
    print(report.summary(), file=out)
    return (EXIT_OK if report.passed else EXIT_THRESHOLD), report


def run_period(lam: float, beta: float, out=None) -> float:
    out = out or sys.stdout
    zp = bloch_period(lam, beta)
    print(f"{zp:.4f}", file=out)
    return zp


def run_xi(cfg: RunConfig, out=None) -> Path:
    out = out or sys.stdout
    ctx = make_context(cfg.params)
    z = cfg.z_grid
    rp, ip, rm, im = xi_curves(z, ctx)
    path = _output_path(cfg, None)
    write_curves(path, {"Z": z, "re_xi_plus": rp, "im_xi_plus": ip,
                        "re_xi_minus": rm, "im_xi_minus": im},
                 cfg.format, meta={"config": cfg.echo(), "version": __version__})
    amp_p = np.hypot(rp, ip).max()
    amp_m = np.hypot(rm, im).max()
    print(f"wrote {path}; max|xi+| = {amp_p:.6g}, max|xi-| = {amp_m:.6g}", file=out)
    return path


def run_disentangle(a_plus: complex, a0: complex, a_minus: complex, out=None):
    out = out or sys.stdout
    t = TripleCoefficients(a_plus, a0, a_minus)
    ff = disentangle(t)
    residual = float(np.max(np.abs(factored_product_2x2(ff) - su11_closed_form_2x2(t))))
    print(f"f = {ff.f!r}", file=out)
    print(f"g = {ff.g!r}", file=out)
    print(f"h = {ff.h!r}", file=out)
    print(f"round-trip residual = {residual:.3e}", file=out)
    return ff, residual


# ---------------------------------------------------------------------------
# argument parsing

def _add_model_flags(p: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        typ = _KEYS[key][0]
        if typ is bool:
            p.add_argument(_flag(key), dest=key, action="store_const", const=True, default=None)
        elif key == "method":
            p.add_argument(_flag(key), dest=key, choices=METHODS, default=None)
        elif key == "format":
            p.add_argument(_flag(key), dest=key, choices=FORMATS, default=None)
        else:
            p.add_argument(_flag(key), dest=key, type=str if typ is str else typ, default=None,
                           metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zigzag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="propagate a single-site input and export the grid")
    sim.add_argument("--config", type=Path, help="flat JSON config; flags override its keys")
    _add_model_flags(sim, list(_KEYS))

    cmp_ = sub.add_parser("compare", help="compare the intensities of two exported grids")
    cmp_.add_argument("grid_a", type=Path, help="reference grid")
    cmp_.add_argument("grid_b", type=Path)
    cmp_.add_argument("--threshold", type=float, default=1e-5)
    cmp_.add_argument("--metric", choices=("rel_l2", "max_abs"), default="rel_l2")

    per = sub.add_parser("period", help="print the Bloch period 2 pi / sqrt(lambda^2 - 4 beta^2)")
    per.add_argument("--lambda", dest="lam", type=float, required=True)
    per.add_argument("--beta", type=float, required=True)

    xi = sub.add_parser("xi", help="export Re/Im of xi+(Z) and xi-(Z)")
    xi.add_argument("--config", type=Path)
    _add_model_flags(xi, [k for k in _KEYS if k not in ("input_site", "method", "m_min", "m_max")])

    dis = sub.add_parser("disentangle", help="factor exp(A+ K+ + A0 K0 + A- K-)")
    dis.add_argument("--a-plus", type=complex, required=True)
    dis.add_argument("--a0", type=complex, required=True)
    dis.add_argument("--a-minus", type=complex, required=True)
    return parser


def _config_from_args(args, required) -> RunConfig:
    file_values, where = ({}, {})
    if getattr(args, "config", None) is not None:
        file_values, where = load_config_file(args.config)
    flags = {k: getattr(args, k) for k in _KEYS if hasattr(args, k)}
    return parse_config(file_values, flags, where, required)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            code, _, _ = run_simulate(_config_from_args(args, _SIM_REQUIRED))
            return code
        if args.command == "xi":
            run_xi(_config_from_args(args, _XI_REQUIRED))
            return EXIT_OK
        if args.command == "compare":
            code, _ = run_compare(args.grid_a, args.grid_b, args.threshold, args.metric)
            return code
        if args.command == "period":
            run_period(args.lam, args.beta)
            return EXIT_OK
        if args.command == "disentangle":
            run_disentangle(args.a_plus, args.a0, args.a_minus)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HyperbolicRegimeError, DegenerateParametersError, FactorizationError,
            IntegrationError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG
