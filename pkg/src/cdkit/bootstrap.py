"""Bootstrap CDs: raw percentile, reflected, studentized, and skew-corrected.

All variants share one resampling engine.  The full (B, n) index block is
drawn in a single vectorized call, so replicate r is a fixed function of the
stream and the dimensions, independent of evaluation order or thread count.

Conventions.  The raw CD is the right-continuous ECDF of the resampled
statistics; the reflected CD pivots each atom through the original estimate
(atom 2*theta_hat - theta_r), which makes H(x) the resampling probability of
{theta_r >= 2*theta_hat - x} exactly.  The studentized CD is the
left-continuous ECDF of theta_hat - se_hat * z_r for studentized residuals
z_r, matching the usual studentized interval endpoints.  The skew-corrected
variant inverts a cubic-adjusted mean pivot through the resampling law.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import probkernel as pk
from .cd_core import ConfidenceDistribution, analytic_cd, sample_cd
from .constructors import DataSample, hall_pivot, hall_pivot_inverse
from .errors import (
    DegenerateSampleError,
    InsufficientDataError,
    InsufficientReplicatesError,
    ParameterDomainError,
)

__all__ = [
    "ResamplePlan",
    "ReplicateSet",
    "resample",
    "raw_bootstrap_cd",
    "reflected_bootstrap_cd",
    "bootstrap_t_cd",
    "hall_bootstrap_cd",
    "dump_replicates",
]

_MIN_RESAMPLES = 100


@dataclass(frozen=True)
class ResamplePlan:
    """How to resample: how many replicates, from which stream."""

    n_resamples: int
    stream: pk.RngStream

    def __post_init__(self):
        if self.n_resamples < _MIN_RESAMPLES:
            raise InsufficientReplicatesError(
                f"need at least {_MIN_RESAMPLES} resamples, got {self.n_resamples}"
            )


@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """Resampled statistics, with degenerate rows dropped and counted."""

    n: int
    theta_hat: float
    se_hat: float | None
    theta: np.ndarray
    se: np.ndarray | None
    excluded: int

    @property
    def kept(self) -> int:
        return int(self.theta.size)


def _index_block(stream: pk.RngStream, n_resamples: int, n: int) -> np.ndarray:
    return stream.generator().integers(0, n, size=(n_resamples, n))


def resample(data: DataSample, plan: ResamplePlan, statistic,
             se_statistic=None) -> ReplicateSet:
    """Apply statistic (and optionally an se statistic) to every resample.

    Rows with a non-finite statistic, or a non-finite or non-positive se,
    are excluded and counted.  Fewer than 100 surviving rows is an error.
    """
    block = _index_block(plan.stream, plan.n_resamples, data.n)
    rows = data.values[block]
    theta = np.array([float(statistic(row)) for row in rows])
    se = None
    keep = np.isfinite(theta)
    if se_statistic is not None:
        se = np.array([float(se_statistic(row)) for row in rows])
        keep &= np.isfinite(se) & (se > 0.0)
    excluded = int(np.sum(~keep))
    theta = theta[keep]
    if se is not None:
        se = se[keep]
        se.setflags(write=False)
    theta.setflags(write=False)
    if theta.size < _MIN_RESAMPLES:
        raise InsufficientReplicatesError(
            f"only {theta.size} usable resamples after excluding {excluded}"
        )
    theta_hat = float(statistic(data.values))
    se_hat = float(se_statistic(data.values)) if se_statistic is not None else None
    if not math.isfinite(theta_hat):
        raise DegenerateSampleError("statistic is not finite on the original sample")
    if se_hat is not None and not (math.isfinite(se_hat) and se_hat > 0.0):
        raise DegenerateSampleError("se statistic must be finite and positive on the original sample")
    return ReplicateSet(n=data.n, theta_hat=theta_hat, se_hat=se_hat,
                        theta=theta, se=se, excluded=excluded)


def _meta(rep: ReplicateSet, variant: str, **extra) -> dict:
    out = {"variant": variant, "n_resamples": rep.kept, "excluded": rep.excluded,
           "theta_hat": rep.theta_hat}
    if rep.se_hat is not None:
        out["se_hat"] = rep.se_hat
    out.update(extra)
    return out


def raw_bootstrap_cd(rep: ReplicateSet) -> ConfidenceDistribution:
    """Percentile CD: the ECDF of the resampled statistics."""
    return sample_cd(rep.theta, meta=_meta(rep, "raw"))


def reflected_bootstrap_cd(rep: ReplicateSet) -> ConfidenceDistribution:
    """Percentile CD reflected through the original estimate."""
    return sample_cd(2.0 * rep.theta_hat - rep.theta, meta=_meta(rep, "reflected"))


def bootstrap_t_cd(rep: ReplicateSet) -> ConfidenceDistribution:
    """Studentized bootstrap CD.

    With z_r = (theta_r - theta_hat) / se_r and atoms a_r = theta_hat -
    se_hat * z_r, H(x) is the fraction of atoms strictly below x (the
    left-continuous ECDF), and the s-quantile is the ceil(B s)-th smallest
    atom.  Both match inverting the studentized pivot's resampling law.
    """
    if rep.se is None or rep.se_hat is None:
        raise ParameterDomainError("studentized bootstrap needs per-resample standard errors")
    z = (rep.theta - rep.theta_hat) / rep.se
    asc = np.sort(rep.theta_hat - rep.se_hat * z)
    b = asc.size

    def cdf(x):
        return np.searchsorted(asc, np.asarray(x, float), side="left") / b

    def quantile(s):
        s = np.asarray(s, dtype=float)
        m = np.clip(np.ceil(s * b - 1e-12).astype(int), 1, b)
        return asc[m - 1]

    return analytic_cd(cdf, (-math.inf, math.inf), quantile_fn=quantile,
                       meta=_meta(rep, "bootstrap-t"))


def hall_bootstrap_cd(data: DataSample, plan: ResamplePlan) -> ConfidenceDistribution:
    """Mean CD from the cubic skew-corrected pivot, calibrated by resampling.

    Each resample contributes the pivot evaluated with its own mean, sd, and
    skewness but centered at the original mean.  H(x) is one minus the ECDF
    of those pivots at the original-sample pivot psi(data, x); the cubic's
    closed-form inverse turns pivot quantiles back into x.
    """
    if data.n < 20:
        raise InsufficientDataError("skew-corrected bootstrap needs n >= 20")
    block = _index_block(plan.stream, plan.n_resamples, data.n)
    rows = data.values[block]
    n = data.n
    rn = math.sqrt(n)
    means = rows.mean(axis=1)
    sds = rows.std(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        m3 = ((rows - means[:, None]) ** 3).mean(axis=1)
        lam = m3 / sds ** 3
        t = rn * (means - data.mean) / sds
        piv = t + lam / (6.0 * rn) * (2.0 * t * t + 1.0) + lam * lam / (27.0 * n) * t ** 3
    keep = np.isfinite(piv)
    excluded = int(np.sum(~keep))
    piv = np.sort(piv[keep])
    if piv.size < _MIN_RESAMPLES:
        raise InsufficientReplicatesError(
            f"only {piv.size} usable resamples after excluding {excluded}"
        )
    b = piv.size
    meta = {"variant": "hall", "n_resamples": b, "excluded": excluded,
            "theta_hat": data.mean, "skewness": data.skewness}

    def cdf(x):
        g = np.asarray(hall_pivot(data, x), dtype=float)
        return 1.0 - np.searchsorted(piv, g, side="right") / b

    def quantile(s):
        s = np.asarray(s, dtype=float)
        m = np.clip(np.floor((1.0 - s) * b + 1e-12).astype(int), 0, b - 1)
        return hall_pivot_inverse(data, piv[m])

    return analytic_cd(cdf, (-math.inf, math.inf), quantile_fn=quantile, meta=meta)


def dump_replicates(rep: ReplicateSet, path) -> None:
    """Write replicates as CSV: replicate index, theta, and se when present."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if rep.se is None:
            writer.writerow(["replicate", "theta"])
            for i, th in enumerate(rep.theta):
                writer.writerow([i, f"{th:.17g}"])
        else:
            writer.writerow(["replicate", "theta", "se"])
            for i, (th, s) in enumerate(zip(rep.theta, rep.se)):
                writer.writerow([i, f"{th:.17g}", f"{s:.17g}"])
