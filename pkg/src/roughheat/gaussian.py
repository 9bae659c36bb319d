"""Exact sampling and metric geometry of the additive-noise solution.

With constant sigma = 1 and zero initial data the mild solution is a
centered Gaussian field, so instead of time-stepping it can be sampled
exactly: build the covariance matrix over a finite point set, factorize,
and draw.  Everything in this module hangs off one integral identity.
Writing the covariance in Fourier space against the spectral weight
|xi|^(1-2H) and integrating out time leaves

    E[u(t,x) u(s,y)] = int_0^inf xi^(-1-2H) cos((x-y) xi)
                       (exp(-|t-s| xi^2) - exp(-(t+s) xi^2)) dxi,

and substituting the time variable back in the other direction turns
this oscillatory integral into a bounded smooth one,

    = (kappa/2) int_{|t-s|^H}^{(t+s)^H} M(1-H; 1/2; -(x-y)^2 / (4 u^(1/H))) du,

with M Kummer's confluent hypergeometric function and kappa =
Gamma(1-H)/H.  Both the adaptive scalar route and the fixed-panel bulk
route below evaluate this form; the test suite pins them against each
other and against high-precision evaluations of the oscillatory form.

The spectral weight carries no unit-box constant, so Var u(t,x) =
2^(H-1) kappa t^H; solutions driven by the unit-box-normalized noise of
the noise module differ by the square root of Hurst.spectral_const.

Distances derived from the covariance (the canonical metric of the
field, and the metrics of its spatial and temporal increment processes)
are computed from the same quadrature by bilinearity, which keeps every
metric statement in the package on a single numerical footing.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import fieldio
from .noise import resolve_workers
from .params import Grid, Hurst
from .quadrature import panel_nodes

__all__ = [
    "PointSet",
    "GaussianField",
    "covariance_uadd",
    "covariance_matrix",
    "natural_metric",
    "comparison_metric",
    "increment_metric",
    "sample",
    "increment_field",
]


# ---------------------------------------------------------------- point sets


@dataclass(frozen=True)
class PointSet:
    """Finite ordered set of space-time points (t, x) with t >= 0.

    The order is meaningful: covariance matrices and sampled value
    arrays are indexed by it.  Points must be distinct; t = 0 points
    are allowed (the field vanishes there) but make the covariance
    singular, which the sampling jitter absorbs.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple((float(t), float(x)) for t, x in self.points)
        if not pts:
            raise ValueError("point set must not be empty")
        if len(set(pts)) != len(pts):
            raise ValueError("points must be distinct")
        if any(t < 0.0 for t, _ in pts):
            raise ValueError("times must be nonnegative")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def arrays(self):
        """Times and positions as a pair of float arrays."""
        arr = np.asarray(self.points, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy()

    @classmethod
    def from_grid(cls, times, positions):
        """Product of a time list and a position list, time-major order."""
        return cls(
            tuple((float(t), float(x)) for t in times for x in positions)
        )


def _point_arrays(points):
    if isinstance(points, PointSet):
        return points.arrays()
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {arr.shape}")
    if np.any(arr[:, 0] < 0.0):
        raise ValueError("times must be nonnegative")
    return arr[:, 0].copy(), arr[:, 1].copy()


# ---------------------------------------------------------------- covariance

# The Kummer integrand is smooth on (0, 1] but behaves like
# u^((1-H)/H) near u = 0 when the lower limit is 0 (equal times), a
# fractional power; geometric panels toward 0 absorb it.  16-node
# Gauss-Legendre on 27 panels stays within ~1e-13 of the adaptive
# route over the whole admissible H range.
_COV_EDGES = np.concatenate([[0.0], np.geomspace(1.0e-7, 1.0, 27)])
_COV_NODES, _COV_WEIGHTS = panel_nodes(_COV_EDGES, 16)


def covariance_uadd(p, q, hurst):
    """Covariance E[u(p) u(q)] of the additive-noise field, u(0, .) = 0.

    p and q are (t, x) pairs with t >= 0.  Evaluated by adaptive
    quadrature of the Kummer form of the spectral integral; a quadrature
    that fails to converge raises rather than returning a silent
    best-effort value.
    """
    t, x = (float(v) for v in p)
    s, y = (float(v) for v in q)
    if t < 0.0 or s < 0.0:
        raise ValueError(f"times must be nonnegative, got {t} and {s}")
    if t == 0.0 or s == 0.0:
        return 0.0
    H = hurst.h
    inv_h = 1.0 / H
    lo = abs(t - s) ** H
    hi = (t + s) ** H
    w2 = 0.25 * (x - y) ** 2

    def integrand(u):
        if u <= 0.0:
            return 0.0 if w2 > 0.0 else 1.0
        log_arg = math.log(w2) - inv_h * math.log(u) if w2 > 0.0 else -math.inf
        if log_arg > 700.0:
            # Kummer argument beyond double range; the value itself has
            # long underflowed
            return 0.0
        return special.hyp1f1(1.0 - H, 0.5, -w2 * u**-inv_h)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(
                integrand, lo, hi, epsabs=1.0e-13, epsrel=1.0e-11, limit=200
            )
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(
                f"covariance quadrature did not converge for ({t}, {x}) x "
                f"({s}, {y}) at H = {H}: {exc}"
            ) from None
    return 0.5 * hurst.variance_scale * val


def _bulk_covariance(gaps, sums, seps, hurst):
    """Vectorized covariance from arrays of |t-s|, t+s and |x-y|.

    Fixed-panel counterpart of covariance_uadd; the two are pinned
    against each other in the tests.
    """
    H = hurst.h
    lo = gaps**H
    span = sums**H - lo
    u = lo[:, None] + span[:, None] * _COV_NODES[None, :]
    w2 = 0.25 * seps * seps
    # invalid: 0 * inf on rows that are fully degenerate (span 0); the
    # where() below rewrites every affected entry
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        z = -w2[:, None] * u ** (-1.0 / H)
    # w = 0 must give argument exactly 0 even against an overflowed
    # power; elsewhere clamp -inf into range (the Kummer value there
    # underflows to 0 anyway)
    z = np.where(w2[:, None] == 0.0, 0.0, np.maximum(z, -1.0e308))
    vals = special.hyp1f1(1.0 - H, 0.5, z)
    # reduce with pairwise sum along the node axis, not BLAS: the
    # result must be bit-identical however the rows are chunked
    core = (vals * _COV_WEIGHTS).sum(axis=1)
    return 0.5 * hurst.variance_scale * span * core


def covariance_matrix(points, hurst, *, workers=None):
    """Covariance matrix of the additive field over a list of points.

    Accepts a PointSet or an (n, 2) array of (t, x) rows; rows need not
    be distinct.  Entries depend on the points only through
    (|t-s|, t+s, |x-y|), so the upper triangle is deduplicated to its
    unique triples before quadrature; on product grids this collapses
    the work by one to two orders of magnitude.  workers > 1 splits the
    unique triples across threads; the result does not depend on the
    split.
    """
    ts, xs = _point_arrays(points)
    n = ts.size
    iu, ju = np.triu_indices(n)
    keys = np.column_stack(
        (np.abs(ts[iu] - ts[ju]), ts[iu] + ts[ju], np.abs(xs[iu] - xs[ju]))
    )
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    del keys

    workers = resolve_workers(workers)
    vals = np.empty(uniq.shape[0])
    if workers == 1 or uniq.shape[0] < 1024:
        vals[:] = _bulk_covariance(uniq[:, 0], uniq[:, 1], uniq[:, 2], hurst)
    else:
        chunk = max(1, -(-uniq.shape[0] // (4 * workers)))

        def fill(start):
            stop = min(start + chunk, uniq.shape[0])
            vals[start:stop] = _bulk_covariance(
                uniq[start:stop, 0],
                uniq[start:stop, 1],
                uniq[start:stop, 2],
                hurst,
            )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(0, uniq.shape[0], chunk)))

    gram = np.empty((n, n))
    flat = vals[inverse]
    gram[iu, ju] = flat
    gram[ju, iu] = flat
    return gram


# ------------------------------------------------------------------- metrics


def _metric_from_radicand(rad):
    if rad < 0.0:
        if rad < -1.0e-12:
            raise ValueError(
                f"metric radicand {rad:.6e} is negative beyond roundoff"
            )
        warnings.warn(
            f"clamping tiny negative metric radicand {rad:.3e} to zero",
            RuntimeWarning,
            stacklevel=3,
        )
        return 0.0
    return math.sqrt(rad)


def natural_metric(p, q, hurst):
    """Canonical distance d(p, q) = (E[(u(p) - u(q))^2])^(1/2).

    Computed from three covariance quadratures.  Radicands below
    -1e-12 raise; tiny negatives from quadrature roundoff clamp to 0
    with a warning.
    """
    rad = (
        covariance_uadd(p, p, hurst)
        + covariance_uadd(q, q, hurst)
        - 2.0 * covariance_uadd(p, q, hurst)
    )
    return _metric_from_radicand(rad)


def comparison_metric(p, q, hurst):
    """Explicit distance min(|x-y|^H, (t^s)^(H/2)) + |t-s|^(H/2).

    Equivalent to the canonical metric up to H-dependent constants on
    t, s > 0; the sampled ratio window is part of the acceptance suite.
    """
    t, x = (float(v) for v in p)
    s, y = (float(v) for v in q)
    H = hurst.h
    return (
        min(abs(x - y) ** H, min(t, s) ** (0.5 * H))
        + abs(t - s) ** (0.5 * H)
    )


_INCREMENT_SIGNS = (1.0, -1.0, -1.0, 1.0)


def increment_metric(t, x, y, hurst, *, h_shift=None, tau_shift=None):
    """Distance between increments at x and y, at a common base time t.

    With h_shift = h this is (E[(D u(t,x) - D u(t,y))^2])^(1/2) for the
    spatial increment D u(t, x) = u(t, x+h) - u(t, x); with tau_shift it
    is the same for the temporal increment u(t+tau, x) - u(t, x).
    Exactly one shift must be given, and it must be nonzero.  Evaluated
    by expanding the square into sixteen covariance terms.
    """
    if (h_shift is None) == (tau_shift is None):
        raise ValueError("give exactly one of h_shift and tau_shift")
    shift = h_shift if h_shift is not None else tau_shift
    if shift == 0.0:
        raise ValueError("shift must be nonzero")
    t, x, y = float(t), float(x), float(y)
    if h_shift is not None:
        pts = ((t, x + shift), (t, x), (t, y + shift), (t, y))
    else:
        pts = ((t + shift, x), (t, x), (t + shift, y), (t, y))
    rad = 0.0
    for si, pi in zip(_INCREMENT_SIGNS, pts):
        for sj, pj in zip(_INCREMENT_SIGNS, pts):
            rad += si * sj * covariance_uadd(pi, pj, hurst)
    return _metric_from_radicand(rad)


# ------------------------------------------------------------------ sampling


@dataclass(frozen=True)
class GaussianField:
    """Exact joint draws of a Gaussian field over an explicit point set.

    values[p, i] is path p at point i; covariance is the matrix the
    draws were built from (before any jitter) and jitter the diagonal
    shift its factorization needed, 0.0 when none.  Arrays are frozen
    after construction.  grid is optional context carried for binary
    export when the points enumerate a space-time grid.
    """

    point_set: PointSet
    hurst: Hurst
    values: np.ndarray
    covariance: np.ndarray
    seed: int
    jitter: float = 0.0
    grid: Grid | None = None

    def __post_init__(self):
        for name in ("values", "covariance"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.point_set):
            raise ValueError(
                f"values shape {self.values.shape} does not cover "
                f"{len(self.point_set)} points"
            )

    @property
    def n_paths(self):
        return self.values.shape[0]

    def save(self, path):
        """Binary export in the shared field layout; needs a grid."""
        if self.grid is None:
            raise ValueError(
                "binary export needs the generating grid; this field was "
                "sampled over a bare point set"
            )
        fieldio.write_field(
            path, self.values, self.grid, self.hurst, seed=self.seed
        )

    def save_csv(self, path):
        """Long-format CSV: one row per (path, point)."""
        ts, xs = self.point_set.arrays()
        n = len(self.point_set)
        fieldio.write_table_csv(
            path,
            {
                "path": [int(p) for p in range(self.n_paths) for _ in range(n)],
                "t": np.tile(ts, self.n_paths).tolist(),
                "x": np.tile(xs, self.n_paths).tolist(),
                "value": [float(v) for v in self.values.ravel()],
            },
        )

    def save_covariance_csv(self, path):
        """Covariance matrix as plain CSV rows, full precision."""
        with open(path, "w") as fh:
            for row in self.covariance:
                fh.write(",".join(fieldio.format_float(v) for v in row))
                fh.write("\n")


def _factor_covariance(gram):
    """Cholesky factor with an escalating diagonal jitter ladder.

    Tries the bare matrix first, then jitters from 1e-14 to 1e-10 of
    the mean diagonal in decade steps.  Beyond that the matrix is
    treated as genuinely indefinite and the failure names the offending
    eigenvalue.
    """
    n = gram.shape[0]
    scale = float(np.trace(gram)) / n
    if scale <= 0.0:
        scale = 1.0
    for delta in (0.0, *(10.0**k * 1.0e-14 * scale for k in range(5))):
        try:
            chol = np.linalg.cholesky(gram + delta * np.eye(n) if delta else gram)
        except np.linalg.LinAlgError:
            continue
        return chol, delta
    smallest = float(np.linalg.eigvalsh(gram)[0])
    raise np.linalg.LinAlgError(
        "covariance is not positive definite within the jitter budget "
        f"(1e-10 of the mean diagonal): smallest eigenvalue {smallest:.6e}"
    )


def _draw_paths(chol, n_paths, seed, workers):
    """Correlated draws, one counter-based generator per path.

    Path p is chol @ z_p with z_p standard normal from a generator
    seeded by (seed, path index), so any batch split over any worker
    count reproduces the same values bit for bit.
    """
    n = chol.shape[0]
    values = np.empty((n_paths, n))

    def fill(start, stop):
        for p in range(start, stop):
            ss = np.random.SeedSequence(seed, spawn_key=(p,))
            rng = np.random.Generator(np.random.Philox(ss))
            values[p] = chol @ rng.standard_normal(n)

    if workers == 1:
        fill(0, n_paths)
    else:
        chunk = max(1, -(-n_paths // (4 * workers)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(
                pool.map(
                    lambda lo: fill(lo, min(lo + chunk, n_paths)),
                    range(0, n_paths, chunk),
                )
            )
    return values


def sample(point_set, hurst, n_paths, seed, *, workers=None, grid=None):
    """Draw n_paths exact joint samples of the additive field.

    Builds the covariance over the point set, factorizes it (jitter
    ladder as documented on the factorizer) and applies the factor to
    per-path standard normal vectors.  Draws are exact multivariate
    normals up to the jitter, which is at most 1e-10 of the mean
    variance.  Deterministic in (point_set, hurst, n_paths, seed),
    independent of workers.
    """
    if not isinstance(point_set, PointSet):
        point_set = PointSet(tuple(map(tuple, point_set)))
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    workers = resolve_workers(workers)
    gram = covariance_matrix(point_set, hurst, workers=workers)
    chol, delta = _factor_covariance(gram)
    values = _draw_paths(chol, int(n_paths), int(seed), workers)
    return GaussianField(
        point_set=point_set,
        hurst=hurst,
        values=values,
        covariance=gram,
        seed=int(seed),
        jitter=delta,
        grid=grid,
    )


def increment_field(
    t,
    half_width,
    hurst,
    n_paths,
    seed,
    *,
    h_shift=None,
    tau_shift=None,
    n_points=65,
    workers=None,
):
    """Exact draws of an increment process on an x-grid over [-L, L].

    With h_shift = h the sampled process is x -> u(t, x+h) - u(t, x);
    with tau_shift it is x -> u(t+tau, x) - u(t, x).  The covariance of
    the increments comes from the four-term bilinear expansion of the
    field covariance over the doubled point list, then sampling follows
    the same factor-and-draw route as sample().  The returned field's
    point set holds the base points (t, x_j).
    """
    if (h_shift is None) == (tau_shift is None):
        raise ValueError("give exactly one of h_shift and tau_shift")
    shift = float(h_shift if h_shift is not None else tau_shift)
    if shift == 0.0:
        raise ValueError("shift must be nonzero")
    t = float(t)
    if t < 0.0:
        raise ValueError(f"base time must be nonnegative, got {t}")
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    xs = (
        np.linspace(-half_width, half_width, n_points)
        if n_points > 1
        else np.array([0.0])
    )
    base = [(t, x) for x in xs]
    if h_shift is not None:
        shifted = [(t, x + shift) for x in xs]
    else:
        shifted = [(t + shift, x) for x in xs]
    # base and shifted lists may share points (e.g. h equal to the grid
    # step), so the doubled Gram is assembled from raw rows
    big = covariance_matrix(np.asarray(shifted + base), hurst, workers=workers)
    k = len(xs)
    gram = big[:k, :k] - big[:k, k:] - big[k:, :k] + big[k:, k:]
    workers = resolve_workers(workers)
    chol, delta = _factor_covariance(gram)
    values = _draw_paths(chol, int(n_paths), int(seed), workers)
    return GaussianField(
        point_set=PointSet(tuple(base)),
        hurst=hurst,
        values=values,
        covariance=gram,
        seed=int(seed),
        jitter=delta,
    )
