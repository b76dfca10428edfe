"""Guaranteed lower/upper cdf curves and a Monte Carlo reference."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exact_cdf import CdfIntegrator
from .model.distributions import InputDistribution, NotExactlyPolynomial, pdf_as_piecewise_polynomial
from .model.network import FeedforwardNetwork, Layer, propagate_box
from .pdf_bounds import DEFAULT_VERTEX_BUDGET, bound_pdf, max_cells_per_axis, partition_box
from .regions import enumerate_cells
from .relu_bounding import bound_network

DEFAULT_GRID_SIZE = 1000


class GridMismatchError(ValueError):
    pass


@dataclass
class CdfBounds:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not (self.grid.shape == self.lower.shape == self.upper.shape):
            raise ValueError("grid, lower and upper must have equal length")

    @property
    def gap(self) -> np.ndarray:
        return self.upper - self.lower

    def gap_summary(self) -> tuple[float, float]:
        """Mean and standard deviation of ``upper - lower``."""
        return float(np.mean(self.gap)), float(np.std(self.gap))

    def format_gap(self) -> str:
        m, s = self.gap_summary()
        return f"{m:.4f} ({s:.4f})"

    def violations(self, tol: float = 1e-12) -> list[str]:
        out = []
        if np.any(self.lower < -tol) or np.any(self.upper > 1 + tol):
            out.append("values outside [0, 1]")
        if np.any(self.lower > self.upper + tol):
            out.append("lower exceeds upper")
        if np.any(np.diff(self.lower) < -tol) or np.any(np.diff(self.upper) < -tol):
            out.append("bounds not monotone")
        if np.any(np.diff(self.grid) < 0):
            out.append("grid not sorted")
        return out


@dataclass
class EmpiricalCdf:
    """Empirical cdf of samples; NaN samples (outside the box) never count as ``<= y``."""

    samples: np.ndarray
    n: int
    alpha: float = 0.001

    @classmethod
    def from_values(cls, values, alpha: float = 0.001) -> EmpiricalCdf:
        v = np.asarray(values, dtype=float).ravel()
        return cls(np.sort(v[np.isfinite(v)]), len(v), alpha)

    @property
    def half_width(self) -> float:
        return dkw_half_width(self.n, self.alpha)

    def __call__(self, y) -> np.ndarray:
        return np.searchsorted(self.samples, np.asarray(y, dtype=float), side="right") / self.n


def dkw_half_width(n: int, alpha: float = 0.001) -> float:
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def default_grid(net: FeedforwardNetwork, dist: InputDistribution, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    out = propagate_box(net, dist.box).output
    return np.linspace(out.lower[0], out.upper[0], size)


def _single_output(net: FeedforwardNetwork, component: int) -> FeedforwardNetwork:
    return net if net.n_outputs == 1 and component == 0 else net.select_output(component)


def _stacked(upper: FeedforwardNetwork, lower: FeedforwardNetwork) -> FeedforwardNetwork:
    """Shared hidden layers with both heads side by side (output 0 upper, 1 lower)."""
    hu, hl = upper.layers[-1], lower.layers[-1]
    head = Layer(np.vstack([hu.weights, hl.weights]), np.concatenate([hu.bias, hl.bias]), hu.activation)
    return FeedforwardNetwork(upper.layers[:-1] + (head,))


class BoundsProblem:
    """Everything that does not depend on the query grid.

    Build once with :func:`prepare_bounds`, then evaluate any number of grids.
    """

    def __init__(self, source, pair, pdf_hi, pdf_lo, cells, meta, times, threads=1):
        self.source = source
        self.pair = pair
        self.cells = cells
        self.metadata = meta
        self.runtimes = times
        self.threads = threads
        t = time.perf_counter()
        up_idx, lo_idx = (0, 0) if pair.is_exact else (0, 1)
        jobs = [(pdf_hi, lo_idx), (pdf_lo, up_idx)]
        build = lambda job: CdfIntegrator(cells, *job)  # noqa: E731
        if pdf_hi is pdf_lo and up_idx == lo_idx:
            self._hi = self._lo = build(jobs[0])
        elif threads > 1:
            with ThreadPoolExecutor(max_workers=2) as ex:
                self._hi, self._lo = ex.map(build, jobs)
        else:
            self._hi, self._lo = build(jobs[0]), build(jobs[1])
        times["integrator_setup"] = time.perf_counter() - t

    def raw(self, grid) -> tuple[np.ndarray, np.ndarray]:
        """Unclamped ``(lower, upper)`` integrals on ``grid``."""
        grid = np.asarray(grid, dtype=float).ravel()
        hi = np.array([self._hi.raw_scalar(y) for y in grid])
        lo = hi if self._lo is self._hi else np.array([self._lo.raw_scalar(y) for y in grid])
        return lo, hi

    def evaluate(self, grid) -> CdfBounds:
        grid = np.sort(np.asarray(grid, dtype=float).ravel())
        t = time.perf_counter()
        raw_lo, raw_hi = self.raw(grid)
        upper = np.minimum(1.0, raw_hi)
        lower = np.maximum(0.0, raw_lo)
        # monotone envelopes of valid bounds are still valid bounds
        lower = np.maximum.accumulate(np.minimum(lower, 1.0))
        upper = np.minimum.accumulate(np.maximum(upper, 0.0)[::-1])[::-1]
        times = dict(self.runtimes, evaluate=time.perf_counter() - t)
        return CdfBounds(grid, lower, upper, dict(self.metadata, runtimes=times))


def prepare_bounds(
    net: FeedforwardNetwork,
    dist: InputDistribution,
    n_per_region: int = 5,
    vertex_budget: int = DEFAULT_VERTEX_BUDGET,
    component: int = 0,
    cells_per_axis: int | None = None,
    max_cells: int = 10**6,
    threads: int = 1,
) -> BoundsProblem:
    if dist.dim != net.n_inputs:
        raise ValueError(f"distribution has dimension {dist.dim}, network expects {net.n_inputs}")
    times = {}
    t = time.perf_counter()
    src = _single_output(net, component)
    pair = bound_network(src, dist.box, n_per_region)
    times["bound_network"] = time.perf_counter() - t

    t = time.perf_counter()
    exact = pdf_as_piecewise_polynomial(dist)
    meta = {}
    if isinstance(exact, NotExactlyPolynomial):
        k = cells_per_axis or max_cells_per_axis(dist.dim, vertex_budget)
        pb = bound_pdf(dist, partition_box(dist.box, k, vertex_budget))
        pdf_hi, pdf_lo = pb.upper_pdf(), pb.lower_pdf()
        meta.update(pdf_exact=False, cells_per_axis=k, pdf_gap_mass=pb.gap_mass, vertices=pb.partition.vertex_count)
    else:
        pdf_hi = pdf_lo = exact
        meta.update(pdf_exact=True)
    times["bound_pdf"] = time.perf_counter() - t

    t = time.perf_counter()
    body = src if pair.is_exact else _stacked(pair.upper, pair.lower)
    cells = enumerate_cells(body, dist.box, max_cells=max_cells)
    times["enumerate_cells"] = time.perf_counter() - t
    meta.update(
        segments_per_region=n_per_region,
        vertex_budget=vertex_budget,
        component=component,
        n_cells=len(cells),
        network_exact=pair.is_exact,
        mass_deficit=dist.mass_deficit,
    )
    return BoundsProblem(src, pair, pdf_hi, pdf_lo, cells, meta, times, threads)


def cdf_bounds(
    net: FeedforwardNetwork,
    dist: InputDistribution,
    grid=None,
    n_per_region: int = 5,
    vertex_budget: int = DEFAULT_VERTEX_BUDGET,
    component: int = 0,
    cells_per_axis: int | None = None,
    max_cells: int = 10**6,
    threads: int = 1,
) -> CdfBounds:
    """Lower and upper cdf bounds of output ``component`` of ``net`` under ``dist``.

    The upper curve integrates the upper density bound over the lower
    network's sublevel set; the lower curve integrates the lower density
    bound over the upper network's sublevel set.
    """
    problem = prepare_bounds(net, dist, n_per_region, vertex_budget, component, cells_per_axis, max_cells, threads)
    if grid is None:
        grid = default_grid(problem.source, dist)
    return problem.evaluate(grid)


def mc_cdf(
    net: FeedforwardNetwork,
    dist: InputDistribution,
    n_samples: int,
    seed: int = 0,
    component: int = 0,
    alpha: float = 0.001,
    batch: int = 250_000,
) -> EmpiricalCdf:
    """Empirical cdf of ``net(X)[component]`` from seeded samples of ``dist``."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    for start in range(0, n_samples, batch):
        m = min(batch, n_samples - start)
        X = dist.sample(rng, m)
        ok = np.all(np.isfinite(X), axis=1)
        vals = np.full(m, np.nan)
        if ok.any():
            vals[ok] = net(X[ok])[:, component]
        out[start : start + m] = vals
    return EmpiricalCdf.from_values(out, alpha)


def oob_tally(bounds: CdfBounds, estimate, allowance: float = 0.0, tol: float = 1e-12) -> tuple[int, int, int]:
    """Count estimate points below ``lower - allowance`` or above ``upper + allowance``."""
    est = np.asarray(estimate, dtype=float)
    if est.ndim != 2 or est.shape[1] != 2:
        raise ValueError("estimate must be a sequence of (y, p) pairs")
    idx = np.searchsorted(bounds.grid, est[:, 0])
    idx = np.clip(idx, 0, len(bounds.grid) - 1)
    if not np.array_equal(bounds.grid[idx], est[:, 0]):
        raise GridMismatchError("estimate grid is not a subset of the bounds grid")
    p = est[:, 1]
    below = int(np.sum(p < bounds.lower[idx] - allowance - tol))
    above = int(np.sum(p > bounds.upper[idx] + allowance + tol))
    return below, above, len(p)


def write_csv(path, bounds: CdfBounds, mc=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "lower", "upper"] + (["mc"] if mc is not None else []))
        for i, y in enumerate(bounds.grid):
            row = [repr(float(y)), repr(float(bounds.lower[i])), repr(float(bounds.upper[i]))]
            if mc is not None:
                row.append(repr(float(mc[i])))
            w.writerow(row)


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    head, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(head))
    except ValueError as e:
        raise ValueError(f"{path}: malformed CSV ({e})") from None
    return {name: data[:, j] for j, name in enumerate(head)}


def write_metadata(path, bounds: CdfBounds, extra: dict | None = None) -> None:
    meta = dict(bounds.metadata)
    m, s = bounds.gap_summary()
    meta.update(gap_mean=m, gap_std=s, gap_summary=bounds.format_gap(), grid_size=len(bounds.grid))
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
