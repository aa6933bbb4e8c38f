"""Seeded Monte Carlo experiments: calibration, coverage, and consistency.

A CdGenerator names a data-generating process with a true parameter and a CD
construction recipe.  Replicate i draws data from the sub-stream
(master_seed, i, 0) and hands resampling randomness the sub-stream
(master_seed, i, 1), so every replicate is a pure function of the config and
its index: reports are bit-for-bit reproducible at any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import probkernel as pk
from .bootstrap import (
    ResamplePlan,
    bootstrap_t_cd,
    hall_bootstrap_cd,
    raw_bootstrap_cd,
    reflected_bootstrap_cd,
    resample,
)
from .cd_core import (
    ConfidenceDistribution,
    cd_eval,
    cd_quantile,
    central_interval,
    location_scale_cd,
    sample_cd,
)
from .constructors import (
    DataSample,
    PairedSample,
    exponential_rate_cd,
    fisher_z_corr_cd,
    normal_mean_cd,
    normal_variance_cd,
)
from .errors import ConfigError, InsufficientDataError, ParameterDomainError
from .likelihood import likelihood_acd

__all__ = [
    "CdGenerator",
    "CalibrationReport",
    "map_indexed",
    "ks_uniform",
    "calibrate",
    "coverage",
    "generator_from_config",
    "generator_to_config",
    "report_to_json",
    "dump_u_values",
]

_DEFAULT_LEVELS = (0.5, 0.9, 0.95, 0.99)

# which construction recipes make sense for which data model
_SUPPORTED = {
    "normal-mean-known-sigma": (
        "pivot", "raw-bootstrap", "reflected-bootstrap", "bootstrap-t",
        "hall-bootstrap", "likelihood", "asymptotic-mean", "asymptotic-median",
        "mis-scaled-pivot", "point-mass",
    ),
    "normal-mean-unknown-sigma": (
        "pivot", "raw-bootstrap", "reflected-bootstrap", "bootstrap-t",
        "hall-bootstrap", "point-mass",
    ),
    "normal-variance": ("pivot", "point-mass"),
    "bivariate-normal-correlation": ("pivot", "point-mass"),
    "exponential-rate": ("pivot", "likelihood", "point-mass"),
}

_BOOTSTRAP = {"raw-bootstrap", "reflected-bootstrap", "bootstrap-t", "hall-bootstrap"}


def _thread_count() -> int:
    raw = os.environ.get("CDKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_indexed(fn, count: int) -> list:
    """fn(i) for i in range(count), in index order.

    CDKIT_THREADS > 1 fans the calls out to a thread pool; each call must be
    a pure function of its index, so the result list is identical either way.
    """
    workers = _thread_count()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))


@dataclass(frozen=True)
class CdGenerator:
    """A data model with true theta0 plus a CD construction recipe."""

    model: str
    constructor: str
    n: int
    theta0: float
    master_seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in _SUPPORTED:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.constructor not in _SUPPORTED[self.model]:
            raise ConfigError(
                f"constructor {self.constructor!r} is not supported for {self.model!r}")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.model == "normal-variance" and not self.theta0 > 0.0:
            raise ConfigError("variance theta0 must be positive")
        if self.model == "exponential-rate" and not self.theta0 > 0.0:
            raise ConfigError("rate theta0 must be positive")
        if self.model == "bivariate-normal-correlation":
            if not -1.0 < self.theta0 < 1.0:
                raise ConfigError("correlation theta0 must lie in (-1, 1)")
            if self.n < 4:
                raise ConfigError("correlation model needs n >= 4")

    def _param(self, key, default):
        return float(self.params.get(key, default))

    @property
    def data_shape(self) -> str:
        return "paired" if self.model == "bivariate-normal-correlation" else "flat"

    def stream(self, index: int) -> pk.RngStream:
        return pk.RngStream(self.master_seed, index)

    def draw_data(self, index: int) -> np.ndarray:
        rng = self.stream(index).child(0).generator()
        if self.model == "normal-mean-known-sigma" or self.model == "normal-mean-unknown-sigma":
            return rng.normal(self.theta0, self._param("sigma", 1.0), size=self.n)
        if self.model == "normal-variance":
            return rng.normal(self._param("mean", 0.0), math.sqrt(self.theta0), size=self.n)
        if self.model == "exponential-rate":
            return rng.exponential(1.0 / self.theta0, size=self.n)
        rho = self.theta0
        z = rng.normal(0.0, 1.0, size=(self.n, 2))
        return np.column_stack([z[:, 0], rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]])

    def build_cd(self, data: np.ndarray, index: int) -> ConfidenceDistribution:
        if self.constructor == "point-mass":
            return sample_cd([self.theta0])
        if self.constructor in _BOOTSTRAP:
            return self._bootstrap_cd(data, index)
        if self.constructor == "likelihood":
            return self._likelihood_cd(data)
        if self.model == "bivariate-normal-correlation":
            return fisher_z_corr_cd(PairedSample(data))
        sample = DataSample(data)
        if self.model == "normal-mean-known-sigma":
            sigma = self._param("sigma", 1.0)
            if self.constructor == "pivot":
                return normal_mean_cd(sample, sigma=sigma)
            scale = sigma / math.sqrt(self.n)
            if self.constructor == "asymptotic-mean":
                return location_scale_cd(pk.Normal(0.0, 1.0), sample.mean, scale)
            if self.constructor == "asymptotic-median":
                return location_scale_cd(pk.Normal(0.0, 1.0), float(np.median(data)),
                                         scale * math.sqrt(math.pi / 2.0))
            if self.constructor == "mis-scaled-pivot":
                return location_scale_cd(pk.Normal(0.0, 1.0), sample.mean, 0.5 * scale)
        if self.model == "normal-mean-unknown-sigma":
            return normal_mean_cd(sample)
        if self.model == "normal-variance":
            return normal_variance_cd(sample)
        if self.model == "exponential-rate":
            return exponential_rate_cd(sample)
        raise ConfigError(f"unhandled constructor {self.constructor!r}")  # pragma: no cover

    def _bootstrap_cd(self, data, index):
        sample = DataSample(data)
        plan = ResamplePlan(int(self.params.get("B", 1000)), self.stream(index).child(1))
        if self.constructor == "hall-bootstrap":
            return hall_bootstrap_cd(sample, plan)
        mean = lambda row: float(np.mean(row))
        if self.constructor == "bootstrap-t":
            se = lambda row: float(np.std(row, ddof=1)) / math.sqrt(row.size)
            return bootstrap_t_cd(resample(sample, plan, mean, se))
        rep = resample(sample, plan, mean)
        if self.constructor == "raw-bootstrap":
            return raw_bootstrap_cd(rep)
        return reflected_bootstrap_cd(rep)

    def _likelihood_cd(self, data):
        grid_size = int(self.params.get("grid_size", 256))
        n = self.n
        if self.model == "exponential-rate":
            total = float(np.sum(data))
            est = n / total
            loglik = lambda theta, _eta: n * math.log(theta) - theta * total
            half = 14.0 / math.sqrt(n)
            window = (max(est * (1.0 - half), est * 0.01), est * (1.0 + half))
            return likelihood_acd(loglik, window, grid_size, n=n, support=(1e-300, math.inf))
        xbar = float(np.mean(data))
        sigma = self._param("sigma", 1.0)
        loglik = lambda theta, _eta: -n * (theta - xbar) ** 2 / (2.0 * sigma ** 2)
        half = 14.0 * sigma / math.sqrt(n)
        return likelihood_acd(loglik, (xbar - half, xbar + half), grid_size, n=n)

    def replicate(self, index: int) -> ConfidenceDistribution:
        return self.build_cd(self.draw_data(index), index)


# ---------------------------------------------------------------------------
# uniformity test

def _kolmogorov_sf(lam: float) -> float:
    # 2 sum_k (-1)^{k-1} exp(-2 k^2 lam^2), truncated at 1e-10
    if lam <= 1e-3:
        return 1.0
    total = 0.0
    for k in range(1, 1001):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-10:
            break
    return float(min(max(total, 0.0), 1.0))


def ks_uniform(u_values) -> tuple[float, float]:
    """Two-sided KS statistic against U(0,1) with the asymptotic p-value."""
    u = np.sort(np.asarray(u_values, dtype=float))
    if u.size < 10:
        raise InsufficientDataError("uniformity test needs at least 10 values")
    if u[0] < 0.0 or u[-1] > 1.0 or not np.all(np.isfinite(u)):
        raise ParameterDomainError("u-values must lie in [0, 1]")
    n = u.size
    steps = np.arange(1, n + 1) / n
    d_plus = float(np.max(steps - u))
    d_minus = float(np.max(u - (steps - 1.0 / n)))
    d = max(d_plus, d_minus)
    return d, _kolmogorov_sf(math.sqrt(n) * d)


# ---------------------------------------------------------------------------
# experiments

@dataclass(frozen=True, eq=False)
class CalibrationReport:
    """Everything one calibration run produces."""

    u_values: np.ndarray
    ks_statistic: float
    ks_p_value: float
    coverage: tuple[tuple[float, float, float], ...]  # (level, frequency, se)
    median_unbiased_fraction: float
    failures: int
    reps: int
    config: dict


def _replicate_summary(gen: CdGenerator, index: int, levels):
    try:
        cd = gen.replicate(index)
        u = float(cd_eval(cd, gen.theta0))
        hits = tuple(lo <= gen.theta0 <= hi
                     for lo, hi in (central_interval(cd, lv) for lv in levels))
        below = bool(cd_quantile(cd, 0.5) <= gen.theta0)
        return u, hits, below
    except Exception:
        return None


def calibrate(gen: CdGenerator, reps: int, levels=_DEFAULT_LEVELS) -> CalibrationReport:
    """reps seeded (data, CD) draws, u-values, KS, coverage, median check."""
    if reps < 100:
        raise ConfigError("calibration needs reps >= 100")
    rows = map_indexed(lambda i: _replicate_summary(gen, i, levels), reps)
    kept = [row for row in rows if row is not None]
    failures = reps - len(kept)
    if len(kept) < 10:
        raise InsufficientDataError(f"only {len(kept)} usable replicates of {reps}")
    u_arr = np.array([row[0] for row in kept])
    stat, p = ks_uniform(np.clip(u_arr, 0.0, 1.0))
    m = len(kept)
    cov = []
    for j, level in enumerate(levels):
        freq = sum(row[1][j] for row in kept) / m
        cov.append((float(level), freq, math.sqrt(max(freq * (1.0 - freq), 1e-12) / m)))
    med = sum(row[2] for row in kept) / m
    return CalibrationReport(
        u_values=u_arr, ks_statistic=stat, ks_p_value=p, coverage=tuple(cov),
        median_unbiased_fraction=med, failures=failures, reps=reps,
        config=generator_to_config(gen),
    )


def coverage(gen: CdGenerator, levels, reps: int):
    """Empirical central-interval coverage per level, with binomial se."""
    return calibrate(gen, reps, tuple(levels)).coverage


# ---------------------------------------------------------------------------
# config and report plumbing

def generator_to_config(gen: CdGenerator) -> dict:
    return {"model": gen.model, "constructor": gen.constructor, "n": gen.n,
            "theta0": gen.theta0, "seed": gen.master_seed, "params": dict(gen.params)}


def generator_from_config(obj: dict) -> CdGenerator:
    try:
        return CdGenerator(model=obj["model"], constructor=obj["constructor"],
                           n=int(obj["n"]), theta0=float(obj["theta0"]),
                           master_seed=int(obj["seed"]),
                           params=dict(obj.get("params", {})))
    except KeyError as exc:
        raise ConfigError(f"experiment config is missing {exc}") from exc


def report_to_json(report: CalibrationReport) -> str:
    body = {
        "config": report.config,
        "reps": report.reps,
        "failures": report.failures,
        "ks_statistic": report.ks_statistic,
        "ks_p_value": report.ks_p_value,
        "coverage": [{"level": lv, "frequency": fr, "se": se}
                     for lv, fr, se in report.coverage],
        "median_unbiased_fraction": report.median_unbiased_fraction,
        "u_values": [float(v) for v in report.u_values],
    }
    return json.dumps(body, sort_keys=True)


def dump_u_values(report: CalibrationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "u"])
        for i, u in enumerate(report.u_values):
            writer.writerow([i, f"{u:.17g}"])
