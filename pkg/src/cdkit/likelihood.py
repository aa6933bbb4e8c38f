"""Profile likelihoods normalized into asymptotic CDs.

A log-likelihood is profiled over one optional nuisance dimension on a grid,
the peak is refined by a local quadratic fit, and the curvature there gives
the unit information i_n with 1/i_n = -(1/n) * d2/dtheta2 at the peak.  The
normalized curve exp(ell_star)/c_n integrates to one over the window and its
running integral is a proper CD; the companion Wald CD is the matching
truncated normal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri

from .cd_core import ConfidenceDistribution, analytic_cd, grid_cd
from .errors import (
    OptimizationFailureError,
    ParameterDomainError,
    WindowTooNarrowError,
)

__all__ = [
    "ProfileCurve",
    "scalar_maximizer",
    "profile_curve",
    "normalize_to_acd",
    "wald_acd",
    "likelihood_acd",
    "dump_profile",
]

# exp(ell_star) must fall below 1e-12 at the window edges
_EDGE_LOG = math.log(1e-12)
_MIN_GRID = 64


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """Profiled log-likelihood on a window, shifted so the peak is zero."""

    grid: np.ndarray
    ell_star: np.ndarray
    theta_hat: float
    i_n: float
    c_n: float
    n: int

    def __post_init__(self):
        if not (np.all(np.diff(self.grid) > 0.0) and self.grid.ndim == 1):
            raise ParameterDomainError("profile grid must be strictly increasing")
        peak = int(np.argmax(self.ell_star))
        if abs(self.ell_star[peak]) > 1e-9 or abs(self.grid[peak] - self.theta_hat) > 1e-9:
            raise ParameterDomainError("ell_star must peak at zero at theta_hat")
        if not (self.i_n > 0.0 and math.isfinite(self.i_n)):
            raise ParameterDomainError("unit information must be positive and finite")
        if not (self.c_n > 0.0 and math.isfinite(self.c_n)):
            raise ParameterDomainError("normalizer must be positive and finite")
        self.grid.setflags(write=False)
        self.ell_star.setflags(write=False)


def scalar_maximizer(lo: float, hi: float, xatol: float = 1e-8):
    """Bounded derivative-free maximizer factory for the nuisance dimension."""
    if not lo < hi:
        raise ParameterDomainError("maximizer bounds must satisfy lo < hi")

    def maximize(f):
        res = minimize_scalar(lambda e: -f(e), bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol})
        if not res.success:
            raise OptimizationFailureError("nuisance maximization did not converge")
        return float(res.x)

    return maximize


def profile_curve(loglik, theta_window, grid_size: int = 256,
                  nuisance_optimizer=None, *, n: int) -> ProfileCurve:
    """Profile loglik(theta, eta) over eta on a theta grid.

    The evaluator is called as loglik(theta, eta_hat(theta)), with eta_hat
    found by the supplied bounded maximizer (eta is None without one).  The
    peak must be interior to the window; it is refined by a quadratic fit
    through the best three grid points and the curvature comes from a central
    second difference with the grid spacing as step.
    """
    lo, hi = float(theta_window[0]), float(theta_window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ParameterDomainError("theta window must be a finite interval")
    if grid_size < _MIN_GRID:
        raise ParameterDomainError(f"grid_size must be at least {_MIN_GRID}")
    if n < 1:
        raise ParameterDomainError("n must be a positive sample size")

    def profiled(theta):
        try:
            if nuisance_optimizer is None:
                return float(loglik(theta, None))
            eta = nuisance_optimizer(lambda e: float(loglik(theta, e)))
            return float(loglik(theta, eta))
        except OptimizationFailureError as exc:
            raise OptimizationFailureError(str(exc), theta=theta) from exc
        except (ValueError, ArithmeticError) as exc:
            raise OptimizationFailureError(f"log-likelihood failed: {exc}", theta=theta) from exc

    grid = np.linspace(lo, hi, grid_size)
    ell = np.array([profiled(th) for th in grid])
    if not np.all(np.isfinite(ell)):
        bad = float(grid[int(np.argmax(~np.isfinite(ell)))])
        raise ParameterDomainError(f"log-likelihood is not finite at theta = {bad}")

    k = int(np.argmax(ell))
    if k == 0 or k == grid_size - 1:
        err = WindowTooNarrowError(f"profile peak sits on the window edge at {grid[k]}")
        err.edge_theta = float(grid[k])
        raise err
    h = grid[1] - grid[0]
    denom = ell[k - 1] - 2.0 * ell[k] + ell[k + 1]
    theta_hat = float(grid[k])
    ell_hat = float(ell[k])
    if denom < 0.0:
        refined = float(grid[k] + 0.5 * h * (ell[k - 1] - ell[k + 1]) / denom)
        value = profiled(refined)
        if value >= ell_hat:
            theta_hat, ell_hat = refined, value

    # curvature stencil clamped inside the window
    center = min(max(theta_hat, lo + h), hi - h)
    d2 = (profiled(center - h) - 2.0 * profiled(center) + profiled(center + h)) / (h * h)
    if not (d2 < 0.0 and math.isfinite(d2)):
        raise OptimizationFailureError(
            f"profile curvature at the peak is not negative ({d2})", theta=theta_hat)
    i_n = -n / d2

    if np.any(grid == theta_hat):
        ell_star = ell - ell_hat
        ell_star[grid == theta_hat] = 0.0
    else:
        pos = int(np.searchsorted(grid, theta_hat))
        grid = np.insert(grid, pos, theta_hat)
        ell_star = np.insert(ell - ell_hat, pos, 0.0)
    ell_star = np.minimum(ell_star, 0.0)
    dens = np.exp(ell_star)
    c_n = float(np.sum(0.5 * (dens[:-1] + dens[1:]) * np.diff(grid)))
    return ProfileCurve(grid=grid, ell_star=ell_star, theta_hat=theta_hat,
                        i_n=i_n, c_n=c_n, n=n)


def normalize_to_acd(curve: ProfileCurve) -> ConfidenceDistribution:
    """Grid CD with values cumulative-trapezoid(exp(ell_star)) / c_n."""
    if curve.ell_star[0] > _EDGE_LOG or curve.ell_star[-1] > _EDGE_LOG:
        raise WindowTooNarrowError(
            "profile mass has not decayed below 1e-12 at the window edges; widen the window")
    dens = np.exp(curve.ell_star)
    steps = 0.5 * (dens[:-1] + dens[1:]) * np.diff(curve.grid)
    values = np.concatenate([[0.0], np.cumsum(steps)]) / curve.c_n
    meta = {"theta_hat": curve.theta_hat, "i_n": curve.i_n, "c_n": curve.c_n,
            "n": curve.n, "source": "profile"}
    return grid_cd(curve.grid, np.clip(values, 0.0, 1.0), meta=meta)


def wald_acd(theta_hat: float, i_n: float, n: int, window=None) -> ConfidenceDistribution:
    """Normal(theta_hat, i_n / n) restricted and renormalized to the window."""
    if not (i_n > 0.0 and math.isfinite(i_n) and n >= 1):
        raise ParameterDomainError("need positive unit information and n >= 1")
    lo, hi = (-math.inf, math.inf) if window is None else (float(window[0]), float(window[1]))
    if not (lo < hi and lo <= theta_hat <= hi):
        raise ParameterDomainError("window must be nonempty and contain theta_hat")
    sd = math.sqrt(i_n / n)
    p_lo = float(ndtr((lo - theta_hat) / sd)) if math.isfinite(lo) else 0.0
    p_hi = float(ndtr((hi - theta_hat) / sd)) if math.isfinite(hi) else 1.0
    mass = p_hi - p_lo
    if mass <= 0.0:
        raise ParameterDomainError("window carries no normal mass")

    def cdf(x):
        z = (np.asarray(x, float) - theta_hat) / sd
        return np.clip((ndtr(z) - p_lo) / mass, 0.0, 1.0)

    def quantile(s):
        return theta_hat + sd * ndtri(p_lo + np.asarray(s, float) * mass)

    def density(x):
        z = (np.asarray(x, float) - theta_hat) / sd
        return np.exp(-0.5 * z * z) / (sd * mass * math.sqrt(2.0 * math.pi))

    meta = {"theta_hat": theta_hat, "i_n": i_n, "n": n, "source": "wald"}
    return analytic_cd(cdf, (lo, hi), quantile_fn=quantile, density_fn=density, meta=meta)


def likelihood_acd(loglik, theta_window, grid_size: int = 256,
                   nuisance_optimizer=None, *, n: int,
                   support=(-math.inf, math.inf)) -> ConfidenceDistribution:
    """Profile, then normalize, auto-widening the window up to three times.

    On insufficient edge decay the window is recentered at the current peak
    with half-width 10 * sqrt(i_n / n), doubled on each further attempt and
    clamped to the parameter support.
    """
    window = (float(theta_window[0]), float(theta_window[1]))
    for attempt in range(4):
        try:
            curve = profile_curve(loglik, window, grid_size, nuisance_optimizer, n=n)
        except WindowTooNarrowError as exc:
            if attempt == 3:
                raise
            edge = getattr(exc, "edge_theta", 0.5 * (window[0] + window[1]))
            width = window[1] - window[0]
            window = (max(edge - width, support[0]), min(edge + width, support[1]))
            continue
        try:
            return normalize_to_acd(curve)
        except WindowTooNarrowError:
            if attempt == 3:
                raise
            half = 10.0 * math.sqrt(curve.i_n / n) * 2.0 ** attempt
            window = (max(curve.theta_hat - half, support[0]),
                      min(curve.theta_hat + half, support[1]))
    raise WindowTooNarrowError("window widening exhausted")  # pragma: no cover


def dump_profile(curve: ProfileCurve, path) -> None:
    """Write the curve as CSV: theta, ell_star."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "ell_star"])
        for th, es in zip(curve.grid, curve.ell_star):
            writer.writerow([f"{th:.17g}", f"{es:.17g}"])
