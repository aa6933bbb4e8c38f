"""Point estimation and hypothesis support from a CD.

The CD is treated as a distribution estimator: its median, mean, and mode
are point estimators, and the mass it assigns to a null region is the
support the data lend that hypothesis.  Strong support integrates H over the
region; weak support takes the peak of the tail-doubling curve
2 min(H, 1 - H); the union rule for unions of intervals takes the best
single-interval strong support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .cd_core import ConfidenceDistribution, cd_density, cd_eval, cd_quantile
from .errors import (
    NonintegrableCdError,
    OptimizationFailureError,
    ParameterDomainError,
    PartitionError,
    UnsupportedRepresentationError,
)

__all__ = [
    "NullRegion",
    "SupportReport",
    "cd_median",
    "cd_mean",
    "cd_mode",
    "strong_support",
    "weak_support",
    "iut_support",
    "support_report",
    "classify",
]

_MEAN_POINTS = 1024


# ---------------------------------------------------------------------------
# null regions

@dataclass(frozen=True)
class NullRegion:
    """A null hypothesis: a finite union of disjoint closed intervals, or a
    finite set of points.  Interval endpoints may be +-inf."""

    kind: str
    intervals: tuple[tuple[float, float], ...] = ()
    points: tuple[float, ...] = ()

    @staticmethod
    def from_intervals(intervals) -> "NullRegion":
        cleaned = []
        for pair in intervals:
            lo, hi = float(pair[0]), float(pair[1])
            if math.isnan(lo) or math.isnan(hi) or not lo <= hi:
                raise ParameterDomainError(f"interval endpoints must satisfy lo <= hi, got {pair}")
            cleaned.append((lo, hi))
        if not cleaned:
            raise ParameterDomainError("need at least one interval")
        cleaned.sort()
        for (a, b), (c, d) in zip(cleaned, cleaned[1:]):
            if c <= b:
                raise ParameterDomainError("intervals must be pairwise disjoint")
        return NullRegion(kind="intervals", intervals=tuple(cleaned))

    @staticmethod
    def from_points(points) -> "NullRegion":
        pts = sorted(float(p) for p in points)
        if not pts:
            raise ParameterDomainError("need at least one point")
        if any(not math.isfinite(p) for p in pts):
            raise ParameterDomainError("points must be finite")
        return NullRegion(kind="points", points=tuple(pts))

    @staticmethod
    def from_json(text: str) -> "NullRegion":
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ParameterDomainError("region JSON must be an object")
        if "intervals" in obj:
            pairs = [(-math.inf if lo is None else lo, math.inf if hi is None else hi)
                     for lo, hi in obj["intervals"]]
            return NullRegion.from_intervals(pairs)
        if "points" in obj:
            return NullRegion.from_points(obj["points"])
        raise ParameterDomainError("region JSON needs an 'intervals' or 'points' key")

    def to_json(self) -> str:
        if self.kind == "intervals":
            body = [[None if math.isinf(lo) else lo, None if math.isinf(hi) else hi]
                    for lo, hi in self.intervals]
            return json.dumps({"intervals": body})
        return json.dumps({"points": list(self.points)})


# ---------------------------------------------------------------------------
# point estimators

def cd_median(cd: ConfidenceDistribution) -> float:
    return float(cd_quantile(cd, 0.5))


def _integrability_check(cd):
    # reject CDs whose extreme quantiles still carry non-negligible mass
    eps = 1e-6
    q_lo = float(cd_quantile(cd, eps))
    q_hi = float(cd_quantile(cd, 1.0 - eps))
    q25 = float(cd_quantile(cd, 0.25))
    q75 = float(cd_quantile(cd, 0.75))
    tail = (abs(q_lo) + abs(q_hi)) * eps
    scale = max(abs(q25), abs(q75), q75 - q25, 1e-9)
    if not (math.isfinite(q_lo) and math.isfinite(q_hi)) or tail > 0.01 * scale:
        raise NonintegrableCdError(
            f"CD mean does not converge: tail contribution {tail:.3g} vs scale {scale:.3g}"
        )


def cd_mean(cd: ConfidenceDistribution) -> float:
    """The CD mean, integral of t dH(t).

    Sample and grid representations integrate exactly; analytic ones use
    1024-point midpoint quadrature in the quantile domain under the cubic
    map s = 3v^2 - 2v^3, which flattens integrable endpoint singularities.
    """
    if cd.kind == "sample":
        return float(np.dot(cd.atoms, cd.weights))
    if cd.kind == "grid":
        dv = np.diff(cd.values)
        mids = 0.5 * (cd.theta[:-1] + cd.theta[1:])
        total = float(np.sum(dv))
        if total <= 0.0:
            raise NonintegrableCdError("grid CD carries no mass")
        return float(np.dot(dv, mids) / total)
    _integrability_check(cd)
    v = (np.arange(_MEAN_POINTS) + 0.5) / _MEAN_POINTS
    s = 3.0 * v * v - 2.0 * v ** 3
    w = 6.0 * v * (1.0 - v)
    q = np.asarray(cd_quantile(cd, s), dtype=float)
    return float(np.dot(q, w) / np.sum(w))


def cd_mode(cd: ConfidenceDistribution) -> float:
    """Argmax of the CD density over the central 0.998 quantile range.

    Grid CDs report the midpoint of the steepest segment (first such segment
    on ties); analytic CDs refine a coarse scan with a bounded derivative-free
    maximizer to 1e-8.
    """
    if cd.kind == "sample":
        raise UnsupportedRepresentationError("sample CDs have atoms, not a density mode")
    if cd.kind == "grid":
        slopes = np.diff(cd.values) / np.diff(cd.theta)
        idx = int(np.argmax(slopes))
        return float(0.5 * (cd.theta[idx] + cd.theta[idx + 1]))
    lo = float(cd_quantile(cd, 0.001))
    hi = float(cd_quantile(cd, 0.999))
    xs = np.linspace(lo, hi, 513)
    dens = np.asarray(cd_density(cd, xs), dtype=float)
    idx = int(np.argmax(dens))
    a = xs[max(idx - 1, 0)]
    b = xs[min(idx + 1, xs.size - 1)]
    res = minimize_scalar(lambda t: -float(cd_density(cd, t)), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-8})
    if not res.success:
        raise OptimizationFailureError("mode search did not converge", theta=float(res.x))
    # the refined point can only improve on the scan
    return float(res.x) if -res.fun >= dens[idx] else float(xs[idx])


# ---------------------------------------------------------------------------
# supports

def _interval_mass(cd, lo, hi):
    top = cd_eval(cd, hi) if math.isfinite(hi) else 1.0
    bot = cd_eval(cd, lo) if math.isfinite(lo) else 0.0
    return float(np.clip(top - bot, 0.0, 1.0))


def _ccf(cd, x):
    h = float(cd_eval(cd, x))
    return 2.0 * min(h, 1.0 - h)


def strong_support(cd: ConfidenceDistribution, region: NullRegion) -> float:
    """H-mass of the region; identically 0 for point nulls."""
    if region.kind == "points":
        return 0.0
    return float(np.clip(sum(_interval_mass(cd, lo, hi) for lo, hi in region.intervals),
                         0.0, 1.0))


def _interval_weak(cd, lo, hi, med):
    if lo <= med <= hi:
        return 1.0
    # the curve 2 min(H, 1-H) rises to the median then falls, so the
    # supremum over the interval sits at the endpoint nearest the median
    return _ccf(cd, hi) if hi < med else _ccf(cd, lo)


def weak_support(cd: ConfidenceDistribution, region: NullRegion) -> float:
    """sup over the region of 2 min(H, 1 - H)."""
    med = cd_median(cd)
    if region.kind == "points":
        return max(_ccf(cd, p) for p in region.points)
    return max(_interval_weak(cd, lo, hi, med) for lo, hi in region.intervals)


def iut_support(cd: ConfidenceDistribution, region: NullRegion) -> float:
    """Union rule for interval unions: the largest single-interval strong support."""
    if region.kind != "intervals":
        raise ParameterDomainError("the union rule applies to interval regions")
    return max(_interval_mass(cd, lo, hi) for lo, hi in region.intervals)


@dataclass(frozen=True)
class SupportReport:
    """Support summary for one region against one CD."""

    p_s: float
    p_w: float
    p_s_star: float
    points_null: bool
    per_component: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "p_s": self.p_s,
            "p_w": self.p_w,
            "p_s_star": self.p_s_star,
            "points_null": self.points_null,
            "per_component": list(self.per_component),
        }


def support_report(cd: ConfidenceDistribution, region: NullRegion) -> SupportReport:
    med = cd_median(cd)
    if region.kind == "points":
        comps = tuple({"point": p, "p_s": 0.0, "p_w": _ccf(cd, p)} for p in region.points)
        return SupportReport(0.0, weak_support(cd, region), 0.0, True, comps)
    comps = tuple(
        {
            "interval": [None if math.isinf(lo) else lo, None if math.isinf(hi) else hi],
            "p_s": _interval_mass(cd, lo, hi),
            "p_w": _interval_weak(cd, lo, hi, med),
        }
        for lo, hi in region.intervals
    )
    return SupportReport(
        strong_support(cd, region),
        weak_support(cd, region),
        iut_support(cd, region),
        False,
        comps,
    )


# ---------------------------------------------------------------------------
# classification over a partition

def classify(cd: ConfidenceDistribution, partition: Sequence[NullRegion]) -> int:
    """Index of the partition cell with the largest strong support.

    The cells must be interval regions, globally disjoint, and together carry
    all the CD's mass (within 1e-9).  Ties resolve to the lowest index.
    """
    if not partition:
        raise PartitionError("empty partition")
    all_ivals = []
    for region in partition:
        if region.kind != "intervals":
            raise PartitionError("classification needs interval regions")
        all_ivals.extend(region.intervals)
    all_ivals.sort()
    for (a, b), (c, d) in zip(all_ivals, all_ivals[1:]):
        if c < b:
            raise PartitionError("partition cells overlap")
    supports = [strong_support(cd, region) for region in partition]
    total = sum(supports)
    if abs(total - 1.0) > 1e-9:
        raise PartitionError(f"partition misses mass: supports sum to {total!r}")
    return int(np.argmax(supports))
