"""Joint confidence distributions in R^k, represented as draw clouds.

A multivariate CD is carried entirely by a cloud of draws of its random
vector: projection, smooth reparametrization, data depth, and centrality are
all closed over samples, so no k-dimensional CDF object is ever needed.
Linear-sense CDs come from pivots theta_hat - A_n^{-1} eta; circular-sense
confidence regions come from depth-ranked centrality over the cloud.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cd_core import ConfidenceDistribution, cd_eval, sample_cd
from .errors import (
    InsufficientDataError,
    MapDomainError,
    ParameterDomainError,
    SingularMatrixError,
)

_MIN_CLOUD = 1000
_MIN_DIRECTIONS = 180


# ---------------------------------------------------------------------------
# cloud container

@dataclass(frozen=True, eq=False)
class MultiCD:
    """A joint CD for a k-vector parameter, k >= 2, as m >= 1000 draws."""

    cloud: np.ndarray
    theta_hat: np.ndarray = None
    a_matrix: np.ndarray = None
    a_condition: float = None

    def __post_init__(self):
        cloud = np.asarray(self.cloud, dtype=float)
        if cloud.ndim != 2:
            raise ParameterDomainError("cloud must be an (m, k) array")
        if cloud.shape[1] < 2:
            raise ParameterDomainError("joint CDs need dimension k >= 2")
        if cloud.shape[0] < _MIN_CLOUD:
            raise InsufficientDataError(
                f"cloud needs at least {_MIN_CLOUD} draws, got {cloud.shape[0]}")
        if not np.all(np.isfinite(cloud)):
            raise ParameterDomainError("cloud values must be finite")
        object.__setattr__(self, "cloud", cloud)

    @property
    def m(self) -> int:
        return self.cloud.shape[0]

    @property
    def k(self) -> int:
        return self.cloud.shape[1]


def lcd_from_pivot(theta_hat, a_matrix, eta_sampler, m: int) -> MultiCD:
    """Cloud of theta_hat - A^{-1} eta over m seeded draws of eta.

    `eta_sampler(count)` must return a (count, k) array and own its seeding,
    so the construction is reproducible from the caller's stream.
    """
    th = np.asarray(theta_hat, dtype=float).ravel()
    a = np.asarray(a_matrix, dtype=float)
    if a.shape != (th.size, th.size):
        raise ParameterDomainError(
            f"pivot matrix must be {th.size} x {th.size}, got {a.shape}")
    cond = float(np.linalg.cond(a))
    if not math.isfinite(cond):
        raise SingularMatrixError("pivot matrix is singular")
    eta = np.asarray(eta_sampler(int(m)), dtype=float)
    if eta.shape != (int(m), th.size):
        raise ParameterDomainError(
            f"eta sampler must return ({m}, {th.size}) draws, got {eta.shape}")
    try:
        shift = np.linalg.solve(a, eta.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("pivot matrix is singular") from exc
    return MultiCD(th[None, :] - shift, theta_hat=th, a_matrix=a, a_condition=cond)


def project(mcd: MultiCD, lam) -> ConfidenceDistribution:
    """The 1-D CD of lam' theta: the projected cloud as an equal-weight sample."""
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (mcd.k,) or not np.all(np.isfinite(lam)):
        raise ParameterDomainError(f"projection vector must be a finite {mcd.k}-vector")
    if not np.any(lam != 0.0):
        raise ParameterDomainError("projection vector must be nonzero")
    return sample_cd(mcd.cloud @ lam, meta={"source": "projection"})


def transform_mcd(mcd: MultiCD, g) -> MultiCD:
    """Pointwise image cloud g(xi); g maps a k-vector to an l-vector, l >= 2.

    Scalar summaries go through `project` instead, so the image keeps the
    joint-CD invariants.
    """
    rows = [np.atleast_1d(np.asarray(g(row), dtype=float)) for row in mcd.cloud]
    image = np.stack(rows)
    if image.ndim != 2:
        raise ParameterDomainError("map must return a fixed-length vector per point")
    if image.shape[1] < 2:
        raise ParameterDomainError(
            "map image is one-dimensional; use project for scalar functionals")
    if not np.all(np.isfinite(image)):
        raise MapDomainError("map produced non-finite values on the cloud")
    return MultiCD(image)


# ---------------------------------------------------------------------------
# data depth

@dataclass(frozen=True)
class DepthSpec:
    """Depth flavor: Mahalanobis for any k, halfspace counts for k <= 2."""

    kind: str
    directions: int = 360

    def __post_init__(self):
        if self.kind not in ("mahalanobis", "tukey"):
            raise ParameterDomainError(f"unknown depth kind {self.kind!r}")
        if self.kind == "tukey" and self.directions < _MIN_DIRECTIONS:
            raise ParameterDomainError(
                f"tukey depth needs at least {_MIN_DIRECTIONS} directions")


def _as_cloud(cloud) -> np.ndarray:
    arr = np.asarray(cloud, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ParameterDomainError("depth needs an (m, k) cloud with m >= 2")
    return arr


def _as_point(x, k: int) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (k,) or not np.all(np.isfinite(pt)):
        raise ParameterDomainError(f"query point must be a finite {k}-vector")
    return pt


def _scatter_factor(cloud: np.ndarray):
    center = cloud.mean(axis=0)
    scatter = np.atleast_2d(np.cov(cloud, rowvar=False))
    try:
        factor = cho_factor(scatter)
    except LinAlgError as exc:
        raise SingularMatrixError("cloud scatter matrix is singular") from exc
    return center, factor


def _mahalanobis_depth(dev: np.ndarray, factor) -> np.ndarray:
    d2 = np.einsum("ij,ij->i", dev, cho_solve(factor, dev.T).T)
    return 1.0 / (1.0 + np.maximum(d2, 0.0))


def _direction_matrix(count: int) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _tukey_1d(sorted_vals: np.ndarray, x) -> np.ndarray:
    m = sorted_vals.size
    below = np.searchsorted(sorted_vals, x, side="right") / m
    above = (m - np.searchsorted(sorted_vals, x, side="left")) / m
    return np.minimum(below, above)


def depth(spec: DepthSpec, cloud, x) -> float:
    """Depth of one point relative to a cloud.

    Mahalanobis: 1 / (1 + squared scatter distance from the cloud center).
    Tukey k=1: min of the two closed tail fractions at x.  Tukey k=2: the
    smallest cloud fraction among the closed half-planes through x whose
    normals run over `spec.directions` equally spaced angles.
    """
    arr = _as_cloud(cloud)
    pt = _as_point(x, arr.shape[1])
    if spec.kind == "mahalanobis":
        center, factor = _scatter_factor(arr)
        return float(_mahalanobis_depth((pt - center)[None, :], factor)[0])
    if arr.shape[1] == 1:
        return float(_tukey_1d(np.sort(arr[:, 0]), pt[0]))
    if arr.shape[1] != 2:
        raise ParameterDomainError("tukey depth is implemented for k <= 2 only")
    u = _direction_matrix(spec.directions)
    fractions = np.mean(arr @ u.T >= pt @ u.T, axis=0)
    return float(np.min(fractions))


# ---------------------------------------------------------------------------
# centrality

@dataclass(frozen=True, eq=False)
class CentralityFn:
    """Depth-ranked centrality over a reference cloud.

    `depth_table` holds the sorted depths of every cloud point, so each query
    costs one depth evaluation plus one binary search.  Ties count as less
    central (the <= convention).
    """

    spec: DepthSpec
    cloud: np.ndarray
    depth_table: np.ndarray
    depth_of: object


def centrality_fn(spec: DepthSpec, cloud) -> CentralityFn:
    arr = _as_cloud(cloud)
    k = arr.shape[1]
    if spec.kind == "mahalanobis":
        center, factor = _scatter_factor(arr)
        depths = _mahalanobis_depth(arr - center, factor)
        depth_of = lambda pt: float(
            _mahalanobis_depth((pt - center)[None, :], factor)[0])
    elif k == 1:
        srt = np.sort(arr[:, 0])
        depths = _tukey_1d(srt, arr[:, 0])
        depth_of = lambda pt: float(_tukey_1d(srt, pt[0]))
    elif k == 2:
        u = _direction_matrix(spec.directions)
        proj = arr @ u.T
        col_sorted = np.sort(proj, axis=0)
        m = arr.shape[0]
        fractions = np.empty_like(proj)
        for j in range(spec.directions):
            fractions[:, j] = m - np.searchsorted(col_sorted[:, j], proj[:, j],
                                                  side="left")
        depths = np.min(fractions, axis=1) / m

        def depth_of(pt, _u=u, _cols=col_sorted, _m=m):
            px = _u @ pt
            best = _m
            for j in range(_u.shape[0]):
                count = _m - np.searchsorted(_cols[:, j], px[j], side="left")
                if count < best:
                    best = count
            return best / _m
    else:
        raise ParameterDomainError("tukey centrality is implemented for k <= 2 only")
    return CentralityFn(spec=spec, cloud=arr, depth_table=np.sort(depths),
                        depth_of=depth_of)


def centrality(cf: CentralityFn, x) -> float:
    """Fraction of the reference cloud at most as deep as x."""
    pt = _as_point(x, cf.cloud.shape[1])
    dx = cf.depth_of(pt)
    return float(np.searchsorted(cf.depth_table, dx, side="right")
                 / cf.depth_table.size)


def central_region_test(cf: CentralityFn, level: float, x) -> bool:
    """Whether x belongs to the 100*level percent central confidence region."""
    if not 0.0 < level < 1.0:
        raise ParameterDomainError("level must lie strictly between 0 and 1")
    return centrality(cf, x) >= 1.0 - level


def ccf_1d(cd: ConfidenceDistribution, x: float) -> float:
    """Two-sided centrality of a scalar CD: 2 min(H(x), 1 - H(x))."""
    h = float(cd_eval(cd, float(x)))
    return 2.0 * min(h, 1.0 - h)


# ---------------------------------------------------------------------------
# cloud files

def save_cloud_csv(mcd: MultiCD, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(mcd.k)])
        for row in mcd.cloud:
            writer.writerow([f"{v:.17g}" for v in row])


def load_cloud_csv(path) -> MultiCD:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise ParameterDomainError("cloud CSV needs at least two columns")
        rows = [[float(v) for v in row] for row in reader]
    return MultiCD(np.asarray(rows, dtype=float))
