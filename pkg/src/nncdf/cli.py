"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 budget exceeded,
4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds_engine import (
    DEFAULT_GRID_SIZE,
    default_grid,
    dkw_half_width,
    mc_cdf,
    oob_tally,
    prepare_bounds,
    read_csv,
    write_csv,
    write_metadata,
)
from .exact_cdf import CdfIntegrator
from .model.distributions import NotExactlyPolynomial, UnsupportedDensityError, pdf_as_piecewise_polynomial
from .model.io import load_distribution, load_network, save_network
from .pdf_bounds import DEFAULT_VERTEX_BUDGET
from .regions import BudgetError, enumerate_cells
from .relu_bounding import bound_network

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4

EPILOG = """exit codes:
  0  success
  2  configuration error (bad file, unsupported network or density)
  3  budget exceeded (cells or partition vertices)
  4  internal invariant failure
"""


class ConfigError(Exception):
    pass


class InternalError(Exception):
    pass


@dataclass
class RunConfig:
    net: Path | None = None
    dist: Path | None = None
    component: int = 0
    grid: int = DEFAULT_GRID_SIZE
    grid_file: Path | None = None
    segments: int = 5
    vertex_budget: int = DEFAULT_VERTEX_BUDGET
    mc: int = 0
    seed: int = 0
    out: Path | None = None
    threads: int = 1

    @classmethod
    def from_args(cls, a) -> RunConfig:
        cfg = cls(
            net=Path(a.net) if getattr(a, "net", None) else None,
            dist=Path(a.dist) if getattr(a, "dist", None) else None,
            component=getattr(a, "component", 0),
            grid=getattr(a, "grid", DEFAULT_GRID_SIZE),
            grid_file=Path(a.grid_file) if getattr(a, "grid_file", None) else None,
            segments=getattr(a, "segments", 5),
            vertex_budget=getattr(a, "vertex_budget", DEFAULT_VERTEX_BUDGET),
            mc=getattr(a, "mc", 0),
            seed=getattr(a, "seed", 0),
            out=Path(a.out) if getattr(a, "out", None) else None,
            threads=getattr(a, "threads", None) or os.cpu_count() or 1,
        )
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("net", "dist", "grid_file"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                raise ConfigError(f"--{name.replace('_', '-')}: file not found: {p}")
        for name in ("grid", "segments", "vertex_budget", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"--{name.replace('_', '-')} must be positive")
        if self.mc < 0:
            raise ConfigError("--mc must be nonnegative")
        if self.component < 0:
            raise ConfigError("--component must be nonnegative")


def _grid(cfg: RunConfig, net, dist) -> np.ndarray:
    if cfg.grid_file is not None:
        try:
            vals = np.loadtxt(cfg.grid_file, delimiter=",", ndmin=1, dtype=float)
        except ValueError as e:
            raise ConfigError(f"{cfg.grid_file}: {e}") from None
        return np.sort(np.atleast_1d(vals).ravel())
    return default_grid(net.select_output(cfg.component), dist, cfg.grid)


def _load(cfg: RunConfig):
    if cfg.net is None or cfg.dist is None:
        raise ConfigError("--net and --dist are required")
    net = load_network(cfg.net)
    dist = load_distribution(cfg.dist)
    if dist.dim != net.n_inputs:
        raise ConfigError(f"distribution has dimension {dist.dim}, network expects {net.n_inputs}")
    if cfg.component >= net.n_outputs:
        raise ConfigError(f"--component {cfg.component} out of range for {net.n_outputs} outputs")
    return net, dist


def _out(cfg: RunConfig, default: str) -> Path:
    return cfg.out if cfg.out is not None else Path(default)


def cmd_exact_cdf(cfg: RunConfig) -> int:
    net, dist = _load(cfg)
    if not net.is_piecewise_linear:
        bad = [l.activation.value for l in net.layers if not l.activation.is_piecewise_linear]
        raise ConfigError(f"non-ReLU activation ({bad[0]}); use bound-cdf")
    pdf = pdf_as_piecewise_polynomial(dist)
    if isinstance(pdf, NotExactlyPolynomial):
        raise ConfigError(f"density not exactly polynomial: {pdf.reason}; use bound-cdf")
    grid = _grid(cfg, net, dist)
    cells = enumerate_cells(net, dist.box)
    integ = CdfIntegrator(cells, pdf, cfg.component)
    F = np.array([integ(y) for y in grid])
    mc = None
    if cfg.mc:
        mc = mc_cdf(net, dist, cfg.mc, cfg.seed, cfg.component)(grid)
    path = _out(cfg, "exact_cdf.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "cdf"] + (["mc"] if mc is not None else []))
        for i, y in enumerate(grid):
            w.writerow([repr(float(y)), repr(float(F[i]))] + ([repr(float(mc[i]))] if mc is not None else []))
    print(f"wrote {len(grid)} rows to {path} ({len(cells)} activation cells)")
    return EXIT_OK


def cmd_bound_cdf(cfg: RunConfig) -> int:
    net, dist = _load(cfg)
    problem = prepare_bounds(net, dist, cfg.segments, cfg.vertex_budget, cfg.component, threads=cfg.threads)
    grid = _grid(cfg, net, dist)
    bounds = problem.evaluate(grid)
    if bounds.violations():
        raise InternalError("cdf bounds violate their invariants: " + "; ".join(bounds.violations()))
    extra = {}
    mc = None
    if cfg.mc:
        emp = mc_cdf(net, dist, cfg.mc, cfg.seed, cfg.component)
        mc = emp(bounds.grid)
        est = np.column_stack([bounds.grid, mc])
        raw = oob_tally(bounds, est)
        dkw = oob_tally(bounds, est, allowance=emp.half_width)
        extra = {
            "mc_samples": cfg.mc,
            "seed": cfg.seed,
            "dkw_half_width": dkw_half_width(cfg.mc, emp.alpha),
            "oob": {"below": raw[0], "above": raw[1], "total": raw[2]},
            "oob_beyond_dkw": {"below": dkw[0], "above": dkw[1], "total": dkw[2]},
        }
    path = _out(cfg, "bounds.csv")
    write_csv(path, bounds, mc)
    meta_path = path.with_suffix(".json")
    write_metadata(meta_path, bounds, extra)
    print(f"wrote {len(bounds.grid)} rows to {path}; gap mean (std) {bounds.format_gap()}")
    return EXIT_OK


def cmd_approx_net(cfg: RunConfig) -> int:
    net, dist = _load(cfg)
    pair = bound_network(net, dist.box, cfg.segments)
    rng = np.random.default_rng(cfg.seed)
    X = rng.uniform(dist.box.lower, dist.box.upper, size=(1000, dist.dim))
    X = np.vstack([X, dist.box.corners()])
    if pair.sandwich_violations(X):
        raise InternalError("bounding networks fail the sandwich spot-check")
    out = _out(cfg, "approx")
    up = out.with_name(out.name + "_upper.json")
    lo = out.with_name(out.name + "_lower.json")
    save_network(pair.upper, up)
    save_network(pair.lower, lo)
    print(f"wrote {up} and {lo} (hidden widths {pair.upper.widths[1:-1]})")
    return EXIT_OK


def cmd_pdf_curve(args) -> int:
    try:
        data = read_csv(args.cdf)
    except (OSError, ValueError) as e:
        raise ConfigError(str(e)) from None
    if "y" not in data:
        raise ConfigError(f"{args.cdf}: no 'y' column")
    cols = [c for c in data if c != "y"]
    col = args.column or (cols[0] if cols else None)
    if col not in data:
        raise ConfigError(f"{args.cdf}: no column {col!r}")
    y, F = data["y"], data[col]
    if len(y) < 3:
        raise ConfigError("need at least 3 grid points for finite differences")
    if np.any(np.diff(y) <= 0):
        raise ConfigError("grid must be strictly increasing")
    pdf = np.gradient(F, y)
    path = Path(args.out) if args.out else Path("pdf.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "pdf_estimate"])
        for a, b in zip(y, pdf):
            w.writerow([repr(float(a)), repr(float(b))])
    print(f"wrote {len(y)} rows to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nncdf",
        description="Exact values and guaranteed bounds of a network output's cdf.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=True):
        sp.add_argument("--net", required=True, help="network JSON")
        sp.add_argument("--dist", required=True, help="distribution JSON")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        if grid:
            sp.add_argument("--component", type=int, default=0, help="output index")
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE, help="number of grid points")
            g.add_argument("--grid-file", help="file with one threshold per line")
            sp.add_argument("--mc", type=int, default=0, help="Monte Carlo samples for a reference column")

    sp = sub.add_parser("exact-cdf", help="exact cdf of a ReLU network", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.set_defaults(func=lambda a: cmd_exact_cdf(RunConfig.from_args(a)))

    sp = sub.add_parser("bound-cdf", help="guaranteed cdf bounds", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--segments", type=int, default=5, help="segments per curvature region")
    sp.add_argument("--vertex-budget", type=int, default=DEFAULT_VERTEX_BUDGET)
    sp.set_defaults(func=lambda a: cmd_bound_cdf(RunConfig.from_args(a)))

    sp = sub.add_parser("approx-net", help="write upper/lower ReLU bounding networks", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp, grid=False)
    sp.add_argument("--segments", type=int, default=5)
    sp.set_defaults(func=lambda a: cmd_approx_net(RunConfig.from_args(a)))

    sp = sub.add_parser("pdf-curve", help="finite-difference pdf from a cdf CSV", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("--cdf", required=True, help="CSV with a 'y' column and a cdf column")
    sp.add_argument("--column", help="cdf column (default: first after 'y')")
    sp.add_argument("--out", help="output path")
    sp.set_defaults(func=cmd_pdf_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as e:
        print(f"error: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ConfigError, UnsupportedDensityError, OSError, ValueError, KeyError, IndexError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
