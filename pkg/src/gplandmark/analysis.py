"""Verification tools for greedy designs.

Power function maxima, fill distances, baseline designs, the greedy versus
best-candidate bound, and log-log convergence fits.  MSPE values are in
squared units throughout.
"""

import csv
import json
import logging
import os
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, EmptyDesignError, NonpositiveSigmaError, ValidationError
from .landmarking import mspe_field
from .mesh_io import as_points

logger = logging.getLogger(__name__)

METHODS = ("greedy", "random", "fps", "grid")
GROWTH_LIMIT = 0.25


@dataclass
class DesignReport:
    design: list
    max_mspe: float
    fill_distance: float
    method: str
    seed: int = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown design method {self.method!r}")
        if self.max_mspe < 0 or self.fill_distance < 0:
            raise ValidationError("max_mspe and fill_distance must be nonnegative")
        if len(set(self.design)) != len(self.design):
            raise ValidationError("design indices must be distinct")

    def to_dict(self):
        return {"design": [int(i) for i in self.design], "max_mspe": float(self.max_mspe),
                "fill_distance": float(self.fill_distance), "method": self.method,
                "seed": self.seed, "size": len(self.design)}


@dataclass
class ConvergenceFit:
    n_range: tuple
    slope: float
    intercept: float
    r_squared: float
    scale: str = "loglog"
    excluded: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        return d


@dataclass
class BoundCheck:
    m: int
    lhs: float
    rhs: float
    best_pi: float
    max_diag: float
    n_candidates: int

    @property
    def passed(self):
        return bool(self.lhs <= self.rhs)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = self.passed
        return d


@dataclass
class FillScaling:
    n_list: list
    fill: list
    scaled: list
    growth: float
    flagged: bool

    def to_dict(self):
        return asdict(self)


def power_max(K, design, policy="none"):
    """Largest MSPE over all vertices for the given design."""
    return float(mspe_field(K, design, policy).max())


def fill_distance(points, design):
    """Largest Euclidean distance from any point to its nearest design point."""
    x = as_points(points)
    design = np.asarray(design, dtype=np.int64)
    if design.size == 0:
        raise EmptyDesignError("fill distance of an empty design is undefined")
    dist, _ = cKDTree(x[design]).query(x)
    return float(dist.max())


def farthest_point_sampling(points, n, start=0):
    x = as_points(points)
    if not 1 <= n <= len(x):
        raise ValidationError(f"design size must lie in [1, {len(x)}], got {n}")
    chosen = [int(start)]
    dist = np.linalg.norm(x - x[start], axis=1)
    for _ in range(n - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        np.minimum(dist, np.linalg.norm(x - x[nxt], axis=1), out=dist)
    return chosen


def baseline_design(points, method, n, seed=None):
    """Random (seeded) or farthest-point design of size ``n``.

    FPS starts from index 0.
    """
    npts = len(as_points(points))
    if not 0 <= n <= npts:
        raise ValidationError(f"design size must lie in [0, {npts}], got {n}")
    if method == "random":
        rng = np.random.default_rng(seed)
        return [int(i) for i in rng.choice(npts, size=n, replace=False)]
    if method == "fps":
        return farthest_point_sampling(points, n) if n else []
    raise ValidationError(f"unknown baseline method {method!r}")


def design_report(K, points, design, method, seed=None):
    return DesignReport(list(design), power_max(K, design), fill_distance(points, design), method, seed)


def candidate_designs(points, m, n_random=200, seed=0):
    """``n_random`` seeded random designs plus one FPS design, all of size ``m``."""
    rng = np.random.default_rng([int(seed), int(m)])
    npts = len(as_points(points))
    pool = [[int(i) for i in rng.choice(npts, size=m, replace=False)] for _ in range(n_random)]
    pool.append(farthest_point_sampling(points, m))
    return pool


def oracle_bound_check(K, trace, candidates):
    """Check ``sigma_{2m} <= 2 sqrt(max_diag) sqrt(min Pi_m)`` over the candidates.

    ``sigma_{2m}`` is the largest MSPE before the ``2m``-th greedy pick, i.e.
    ``trace.sigma_history[2m - 1]``.  Every candidate design upper-bounds the
    width ``d_m``, so a failure signals a bug rather than a weak design.
    """
    candidates = [list(c) for c in candidates]
    if not candidates:
        raise ConfigError("bound check needs at least one candidate design")
    sizes = {len(c) for c in candidates}
    if len(sizes) != 1:
        raise ValidationError("candidate designs must share one size")
    (m,) = sizes
    history = trace.sigma_history if hasattr(trace, "sigma_history") else list(trace)
    if len(history) < 2 * m:
        raise ValidationError(f"greedy trace has {len(history)} steps, bound check at m={m} needs {2 * m}")
    max_diag = float(np.max(K.diag))
    best = min(power_max(K, c) for c in candidates)
    lhs = float(history[2 * m - 1])
    rhs = 2.0 * np.sqrt(max_diag) * np.sqrt(best)
    return BoundCheck(m, lhs, float(rhs), best, max_diag, len(candidates))


def convergence_fit(trace, n_min, n_max, scale="loglog"):
    """Least-squares line through ``log sigma_n`` against ``log n`` or ``n``.

    ``n`` is 1-based: ``sigma_n = trace.sigma_history[n - 1]``.
    Nonpositive values are dropped with a warning when they make up at most
    10% of the range, otherwise NonpositiveSigmaError is raised.
    """
    history = np.asarray(trace.sigma_history if hasattr(trace, "sigma_history") else trace, dtype=np.float64)
    if not 1 <= n_min < n_max <= len(history):
        raise ValidationError(f"fit range [{n_min}, {n_max}] invalid for a trace of length {len(history)}")
    if scale not in ("loglog", "semilog"):
        raise ValidationError(f"unknown scale {scale!r}")
    n = np.arange(n_min, n_max + 1)
    s = history[n_min - 1 : n_max]
    bad = s <= 0
    if bad.any():
        if bad.mean() > 0.1:
            raise NonpositiveSigmaError(f"{int(bad.sum())} of {len(s)} sigma values are nonpositive")
        warnings.warn(f"dropping {int(bad.sum())} nonpositive sigma values from the fit", stacklevel=2)
    n, s = n[~bad], s[~bad]
    x = np.log(n) if scale == "loglog" else n.astype(np.float64)
    y = np.log(s)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ConvergenceFit((int(n_min), int(n_max)), float(slope), float(intercept),
                          float(min(max(r2, 0.0), 1.0)), scale, [int(i) for i in np.flatnonzero(bad) + n_min])


def fill_scaling_check(points, n_list, dim=2, method="fps", limit=GROWTH_LIMIT):
    """``h_n * n^(1/dim)`` for nested FPS designs.

    Flags when the sequence exceeds its first value by more than ``limit``.
    """
    if method != "fps":
        raise ValidationError("fill scaling is only defined for FPS designs")
    n_list = sorted(int(n) for n in n_list)
    order = farthest_point_sampling(points, max(n_list))
    fill = [fill_distance(points, order[:n]) for n in n_list]
    scaled = [h * n ** (1.0 / dim) for h, n in zip(fill, n_list)]
    growth = max(scaled) / scaled[0] - 1.0 if scaled[0] > 0 else 0.0
    return FillScaling(n_list, fill, scaled, float(growth), bool(growth > limit))


# ---------------------------------------------------------------- output


def write_report(out_dir, designs=(), bound_checks=(), fits=(), extra=None):
    """Write report.json plus report.csv (designs), report_bounds.csv and report_fits.csv."""
    doc = {
        "designs": [d.to_dict() for d in designs],
        "bound_checks": [b.to_dict() for b in bound_checks],
        "fits": [f.to_dict() for f in fits],
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["method", "size", "seed", "max_mspe", "fill_distance"])
        for d in designs:
            out.writerow([d.method, len(d.design), "" if d.seed is None else d.seed,
                          repr(float(d.max_mspe)), repr(float(d.fill_distance))])
    with open(os.path.join(out_dir, "report_bounds.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["m", "lhs", "rhs", "best_pi", "n_candidates", "pass"])
        for b in bound_checks:
            out.writerow([b.m, repr(b.lhs), repr(b.rhs), repr(b.best_pi), b.n_candidates, b.passed])
    with open(os.path.join(out_dir, "report_fits.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["n_min", "n_max", "scale", "slope", "intercept", "r_squared"])
        for f in fits:
            out.writerow([f.n_range[0], f.n_range[1], f.scale, repr(f.slope), repr(f.intercept), repr(f.r_squared)])
    return doc
