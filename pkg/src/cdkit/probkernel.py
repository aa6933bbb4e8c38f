"""Distribution primitives: CDFs, quantiles, log-space tails, seeded draws.

Everything downstream of this module treats probability evaluation as exact.
The log-space tail routines are the only nontrivial numerics here: they must
stay accurate where ordinary CDF evaluation underflows (tail masses far below
1e-308), which the slope diagnostics in :mod:`cdkit.compare` rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import special as _sp
from scipy.optimize import brentq as _brentq

from .errors import ParameterDomainError, RootBracketError

__all__ = [
    "RngStream",
    "Normal",
    "StudentT",
    "ChiSquare",
    "Uniform01",
    "Empirical",
    "DistKind",
    "cdf",
    "quantile",
    "log_tail",
    "draw",
    "gauss_legendre",
    "bracket_root",
]

# Direct log(cdf) is used while the tail mass stays comfortably above the
# smallest normal double; below this the log-space routines take over.
_DIRECT_TAIL_FLOOR = 1e-280


# ---------------------------------------------------------------------------
# seeded streams

@dataclass(frozen=True)
class RngStream:
    """A replayable random stream addressed by (master_seed, stream_index).

    Streams with distinct indices (or distinct child lineages) are
    statistically independent; replaying the same address reproduces the same
    draws.  ``generator()`` returns a fresh generator positioned at the start
    of the stream, so a stream value can be shared freely across workers.
    """

    master_seed: int
    stream_index: int = 0
    lineage: tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ParameterDomainError("master_seed must be a nonnegative integer")
        if not isinstance(self.stream_index, (int, np.integer)) or self.stream_index < 0:
            raise ParameterDomainError("stream_index must be a nonnegative integer")
        if any(int(k) < 0 for k in self.lineage):
            raise ParameterDomainError("lineage indices must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_index), *map(int, self.lineage)),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Derive an independent sub-stream; children of distinct indices never collide."""
        return RngStream(self.master_seed, self.stream_index, (*self.lineage, int(index)))


# ---------------------------------------------------------------------------
# distribution kinds

@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ParameterDomainError("Normal mean must be finite")
        if not (self.sd > 0.0 and math.isfinite(self.sd)):
            raise ParameterDomainError("Normal sd must be a positive finite real")


@dataclass(frozen=True)
class StudentT:
    df: float

    def __post_init__(self):
        if not (self.df > 0.0 and math.isfinite(self.df)):
            raise ParameterDomainError("StudentT df must be a positive finite real")


@dataclass(frozen=True)
class ChiSquare:
    df: float

    def __post_init__(self):
        if not (self.df > 0.0 and math.isfinite(self.df)):
            raise ParameterDomainError("ChiSquare df must be a positive finite real")


@dataclass(frozen=True)
class Uniform01:
    pass


@dataclass(frozen=True, eq=False)
class Empirical:
    """Equal-weight atoms on a finite sample; CDF is the right-continuous ECDF."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=float))
        if vals.size < 1:
            raise ParameterDomainError("Empirical needs at least one value")
        if not np.all(np.isfinite(vals)):
            raise ParameterDomainError("Empirical values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


DistKind = Union[Normal, StudentT, ChiSquare, Uniform01, Empirical]


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, (arr.ndim == 0)


# ---------------------------------------------------------------------------
# cdf / quantile

def cdf(d: DistKind, x) -> float | np.ndarray:
    """P(X <= x).  Accepts scalars or arrays; +-inf map to 1/0."""
    arr, scalar = _as_float_array(x)
    if isinstance(d, Normal):
        out = _sp.ndtr((arr - d.mean) / d.sd)
    elif isinstance(d, StudentT):
        out = _sp.stdtr(d.df, arr)
    elif isinstance(d, ChiSquare):
        out = np.where(arr > 0.0, _sp.chdtr(d.df, np.maximum(arr, 0.0)), 0.0)
    elif isinstance(d, Uniform01):
        out = np.clip(arr, 0.0, 1.0)
    elif isinstance(d, Empirical):
        out = np.searchsorted(d.values, arr, side="right") / d.values.size
    else:
        raise ParameterDomainError(f"unknown distribution kind {type(d).__name__}")
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out


def quantile(d: DistKind, p) -> float | np.ndarray:
    """Inverse CDF for p strictly inside (0, 1).

    For Empirical kinds this is the usual left-continuous sample inverse: the
    smallest atom whose ECDF weight reaches p.
    """
    arr, scalar = _as_float_array(p)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ParameterDomainError("quantile requires probabilities strictly in (0, 1)")
    if isinstance(d, Normal):
        out = d.mean + d.sd * _sp.ndtri(arr)
    elif isinstance(d, StudentT):
        out = _sp.stdtrit(d.df, arr)
    elif isinstance(d, ChiSquare):
        out = _sp.chdtri(d.df, 1.0 - arr)
    elif isinstance(d, Uniform01):
        out = arr.copy()
    elif isinstance(d, Empirical):
        n = d.values.size
        # smallest m with m/n >= p; the 1e-12 slack absorbs float fuzz in n*p
        idx = np.ceil(n * arr - 1e-12).astype(int)
        out = d.values[np.clip(idx - 1, 0, n - 1)]
    else:
        raise ParameterDomainError(f"unknown distribution kind {type(d).__name__}")
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# log-space tails

def _t_log_upper_quad(df: float, a: float) -> float:
    """log P(T_df > a) for large a, by segmented Gauss-Legendre in log space."""
    c = _sp.gammaln((df + 1.0) / 2.0) - _sp.gammaln(df / 2.0) - 0.5 * math.log(df * math.pi)

    def log_f(u):
        au = np.abs(u)
        capped = np.minimum(au, 1e130)
        s = np.where(au < 1e130,
                     np.log1p(capped * capped / df),
                     2.0 * np.log(np.maximum(au, 1.0)) - math.log(df))
        return c - 0.5 * (df + 1.0) * s

    lam = (df + 1.0) * a / (df + a * a)  # local decay rate of the density at a
    h = 1.0 / lam
    nodes, weights = gauss_legendre(64)
    total = -np.inf
    s_lo = 0.0
    s_hi = 1.0
    for _ in range(80):
        u_lo, u_hi = a + h * s_lo, a + h * s_hi
        half = 0.5 * (u_hi - u_lo)
        mid = 0.5 * (u_hi + u_lo)
        pts = mid + half * nodes
        seg = _sp.logsumexp(log_f(pts) + np.log(weights * half))
        total = np.logaddexp(total, seg)
        if seg < total + math.log(1e-20):
            break
        s_lo, s_hi = s_hi, 2.0 * s_hi
    return float(total)


def _t_log_cdf(df: float, x: float) -> float:
    p = float(_sp.stdtr(df, x))
    if p >= _DIRECT_TAIL_FLOOR:
        return math.log(p)
    return _t_log_upper_quad(df, -x)


def _gamma_log_lower(a: float, z: float) -> float:
    """log of the regularized lower incomplete gamma P(a, z), series form."""
    if z <= 0.0:
        return -np.inf
    term = 1.0
    total = 1.0
    for m in range(1, 10000):
        term *= z / (a + m)
        total += term
        if term < total * 1e-18:
            break
    return a * math.log(z) - z - float(_sp.gammaln(a + 1.0)) + math.log(total)


def _gamma_log_upper(a: float, z: float) -> float:
    """log of the regularized upper incomplete gamma Q(a, z) via Lentz's continued fraction."""
    tiny = 1e-300
    b = z + 1.0 - a
    c_ = 1.0 / tiny
    d_ = 1.0 / max(b, tiny)
    f = d_
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d_ = an * d_ + b
        if abs(d_) < tiny:
            d_ = tiny
        c_ = b + an / c_
        if abs(c_) < tiny:
            c_ = tiny
        d_ = 1.0 / d_
        delta = d_ * c_
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return -z + a * math.log(z) - float(_sp.gammaln(a)) + math.log(f)


def _chi2_log_cdf(df: float, x: float) -> float:
    if x <= 0.0:
        return -np.inf
    p = float(_sp.chdtr(df, x))
    if p >= _DIRECT_TAIL_FLOOR:
        return math.log(p)
    return _gamma_log_lower(df / 2.0, x / 2.0)


def _chi2_log_sf(df: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    q = float(_sp.chdtrc(df, x))
    if q >= _DIRECT_TAIL_FLOOR:
        return math.log(q)
    return _gamma_log_upper(df / 2.0, x / 2.0)


def log_tail(d: DistKind, x: float, side: str) -> float:
    """log P(X <= x) for side='lower', log P(X > x) for side='upper'.

    Stays accurate far past double underflow for the continuous kinds; an
    empty empirical tail returns -inf.
    """
    if side not in ("lower", "upper"):
        raise ParameterDomainError("side must be 'lower' or 'upper'")
    x = float(x)
    if isinstance(d, Normal):
        z = (x - d.mean) / d.sd
        return float(_sp.log_ndtr(z if side == "lower" else -z))
    if isinstance(d, StudentT):
        return _t_log_cdf(d.df, x) if side == "lower" else _t_log_cdf(d.df, -x)
    if isinstance(d, ChiSquare):
        return _chi2_log_cdf(d.df, x) if side == "lower" else _chi2_log_sf(d.df, x)
    if isinstance(d, Uniform01):
        if side == "lower":
            if x <= 0.0:
                return -np.inf
            return 0.0 if x >= 1.0 else math.log(x)
        if x >= 1.0:
            return -np.inf
        return 0.0 if x <= 0.0 else math.log1p(-x)
    if isinstance(d, Empirical):
        p = float(cdf(d, x))
        if side == "lower":
            return math.log(p) if p > 0.0 else -np.inf
        return math.log1p(-p) if p < 1.0 else -np.inf
    raise ParameterDomainError(f"unknown distribution kind {type(d).__name__}")


# ---------------------------------------------------------------------------
# draws

def draw(stream: RngStream, d: DistKind, count: int) -> np.ndarray:
    """count iid draws; a replayed stream reproduces the same vector."""
    if count < 0:
        raise ParameterDomainError("count must be nonnegative")
    rng = stream.generator()
    if isinstance(d, Normal):
        return rng.normal(d.mean, d.sd, size=count)
    if isinstance(d, StudentT):
        return rng.standard_t(d.df, size=count)
    if isinstance(d, ChiSquare):
        return rng.chisquare(d.df, size=count)
    if isinstance(d, Uniform01):
        return rng.random(count)
    if isinstance(d, Empirical):
        return rng.choice(d.values, size=count, replace=True)
    raise ParameterDomainError(f"unknown distribution kind {type(d).__name__}")


# ---------------------------------------------------------------------------
# shared numerics

@lru_cache(maxsize=32)
def gauss_legendre(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1], cached."""
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _try_eval(f, x: float) -> float:
    try:
        v = float(f(x))
    except (ArithmeticError, ValueError):
        return math.nan
    return v


def _finite_anchor(f, bound: float, inward: float) -> tuple[float, float]:
    # back off a finite support edge until f evaluates finite there
    x = bound
    fx = _try_eval(f, x)
    gap = (inward - bound) * 1e-12
    for _ in range(60):
        if math.isfinite(fx):
            return x, fx
        x = bound + gap
        fx = _try_eval(f, x)
        gap *= 10.0
        if (inward - bound) * (inward - x) <= 0.0:
            break
    raise RootBracketError("function is not finite anywhere near a support edge")


def bracket_root(f, lo: float, hi: float, *, xtol: float = 1e-12) -> float:
    """Root of a monotone-ish f on (lo, hi); endpoints may be infinite.

    Finite edges are nudged inward if f blows up there; infinite sides are
    searched by doubling steps until a sign change appears.
    """
    inner = 0.0
    if math.isfinite(lo) and math.isfinite(hi):
        inner = 0.5 * (lo + hi)
    elif math.isfinite(lo):
        inner = lo + 1.0
    elif math.isfinite(hi):
        inner = hi - 1.0
    if math.isfinite(lo):
        a, fa = _finite_anchor(f, lo, inner)
    else:
        a, fa = inner - 1.0, f(inner - 1.0)
    if math.isfinite(hi):
        b, fb = _finite_anchor(f, hi, inner)
    else:
        b, fb = inner + 1.0, f(inner + 1.0)

    step = max(1.0, abs(b - a))
    for _ in range(220):
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if math.isfinite(fa) and math.isfinite(fb) and fa * fb < 0.0:
            return float(_brentq(f, a, b, xtol=xtol))
        grew = False
        if not math.isfinite(lo):
            a -= step
            fa = f(a)
            grew = True
        if not math.isfinite(hi):
            b += step
            fb = f(b)
            grew = True
        step *= 2.0
        if not grew:
            break
    raise RootBracketError(f"could not bracket a sign change on ({lo}, {hi})")
