"""The driving noise: covariance, inner products, sampling, mollification.

The noise W is white in time and fractional in space with Hurst index
H in (1/4, 1/2).  Its covariance factorizes as min(s,t) * R(x, y) where
R is the fractional-Brownian-motion covariance, which is what makes
exact sampling possible: per time cell, an independent stationary
fractional-Gaussian-noise row over the space cells, realized exactly at
grid resolution by circulant embedding.

The Hilbert-space inner product attached to W has three equivalent
representations (spectral, via one-sided fractional derivatives, via
double increments); all three are implemented against the same
normalization, fixed so that the unit space-time box has variance 1.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft
from scipy import special

from .params import Grid, Hurst
from .quadrature import (
    edges_geometric,
    edges_linear,
    edges_shrink,
    panel_nodes,
    singular_power_nodes,
)

__all__ = [
    "noise_covariance",
    "spatial_correlation",
    "spectral_density",
    "box_covariance",
    "ElementaryIntegrand",
    "inner_product",
    "marchaud_derivative",
    "NoiseRealization",
    "NoiseSampler",
    "sample_noise",
    "sample_noise_batch",
    "mollify",
    "resolve_workers",
]


# ----------------------------
# Covariance and spectral form
# ----------------------------

def spatial_correlation(x, y, hurst):
    """R(x, y) = (|x|^2H + |y|^2H - |x-y|^2H) / 2, the spatial factor."""
    H2 = 2.0 * hurst.h
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 0.5 * (
        np.abs(x) ** H2 + np.abs(y) ** H2 - np.abs(x - y) ** H2
    )


def noise_covariance(t, x, s, y, hurst):
    """E[W(t,x) W(s,y)] = min(s,t) * R(x,y).  Total on t, s >= 0."""
    if t < 0 or s < 0:
        raise ValueError("times must be nonnegative")
    return float(min(s, t) * spatial_correlation(x, y, hurst))


def spectral_density(xi, hurst):
    """Density of the spatial spectral measure, spectral_const * |xi|^(1-2H).

    Singular at the origin in the sense that the power is not defined
    there as a density value; xi = 0 raises.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0.0):
        raise ValueError("spectral density is not defined at xi = 0")
    out = hurst.spectral_const * np.abs(xi) ** (1.0 - 2.0 * hurst.h)
    return float(out) if out.ndim == 0 else out


def box_covariance(box_a, box_b, hurst):
    """Exact covariance of the noise masses of two space-time boxes.

    Boxes are (t0, t1, x0, x1).  Time contributes the overlap length,
    space the increment covariance of the fractional profile.
    """
    ta0, ta1, xa0, xa1 = box_a
    tb0, tb1, xb0, xb1 = box_b
    overlap = max(0.0, min(ta1, tb1) - max(ta0, tb0))
    if overlap == 0.0:
        return 0.0
    R = lambda u, v: spatial_correlation(u, v, hurst)
    return float(
        overlap * (R(xa1, xb1) - R(xa1, xb0) - R(xa0, xb1) + R(xa0, xb0))
    )


@dataclass(frozen=True)
class ElementaryIntegrand:
    """Step function sum_k coeff_k * 1_{[t0,t1) x [x0,x1)} on grid cells.

    pieces holds (coeff, it0, it1, jx0, jx1) with half-open cell index
    ranges; the physical boxes follow from the grid.  Keeping the pieces
    cell-aligned makes the discrete stochastic integral exact in law.
    """

    grid: Grid
    pieces: tuple

    def boxes(self):
        g = self.grid
        L = g.x_half_width
        out = []
        for coeff, it0, it1, jx0, jx1 in self.pieces:
            out.append(
                (
                    coeff,
                    (it0 * g.dt, it1 * g.dt, -L + jx0 * g.dx, -L + jx1 * g.dx),
                )
            )
        return out

    def norm_sq(self, hurst):
        """Exact squared norm in the noise Hilbert space (Gram sum)."""
        boxes = self.boxes()
        total = 0.0
        for ca, a in boxes:
            for cb, b in boxes:
                total += ca * cb * box_covariance(a, b, hurst)
        return total

    def integrate(self, increments):
        """Discrete stochastic integral sum g * dW for stacked increments.

        increments has shape (..., nt, nx); returns shape (...).
        """
        out = 0.0
        for coeff, it0, it1, jx0, jx1 in self.pieces:
            out = out + coeff * increments[..., it0:it1, jx0:jx1].sum(
                axis=(-2, -1)
            )
        return out


# ----------------------------
# Inner product, three forms
# ----------------------------

def _supports_xnodes(space_support, step=0.6, n=16):
    lo, hi = space_support
    n_panels = max(10, int(math.ceil((hi - lo) / step)))
    return panel_nodes(edges_linear(lo, hi, n_panels), n)


def _spatial_fourier(f_vals, g_vals, transform, xi_w, weight_pow):
    # transform: (n_xi, n_x) matrix of exp(-i xi x) * x-weight
    fh = transform @ f_vals
    gh = transform @ g_vals
    # real test functions: negative frequencies contribute the conjugate,
    # so integrate xi > 0 only and double the real part
    return 2.0 * float(np.dot(xi_w * weight_pow, (fh * np.conj(gh)).real))


class _FourierPlan:
    def __init__(self, hurst, space_support, xi_max):
        self.x_nodes, self.x_w = _supports_xnodes(space_support)
        xi_edges = np.concatenate(
            [edges_shrink(1.0, 14), edges_geometric(1.0, xi_max, 28)[1:]]
        )
        self.xi_nodes, self.xi_w = panel_nodes(xi_edges, 16)
        self.weight_pow = self.xi_nodes ** (1.0 - 2.0 * hurst.h)
        self.transform = np.exp(
            -1j * np.outer(self.xi_nodes, self.x_nodes)
        ) * self.x_w[None, :]
        self.const = hurst.spectral_const

    def spatial(self, f, g, s):
        fv = f(s, self.x_nodes)
        gv = g(s, self.x_nodes) if g is not f else fv
        return self.const * _spatial_fourier(
            fv, gv, self.transform, self.xi_w, self.weight_pow
        )


class _IncrementPlan:
    def __init__(self, hurst, space_support):
        self.h2m2 = 2.0 * hurst.h - 2.0
        lo, hi = space_support
        diam = hi - lo
        self.x_nodes, self.x_w = _supports_xnodes(space_support)
        # lag integral: substituted panels near 0 (integrand vanishes
        # quadratically there), geometric panels out to the support
        # diameter, exact power tail beyond
        w_small, ww_small = singular_power_nodes(
            0.5, self.h2m2, 2, levels=22, n=12
        )
        w_big, ww_big = panel_nodes(edges_geometric(0.5, diam, 14), 12)
        self.w_nodes = np.concatenate([w_small, w_big])
        self.w_w = np.concatenate([ww_small, ww_big * w_big**self.h2m2])
        self.tail_factor = diam ** (2.0 * hurst.h - 1.0) / (
            1.0 - 2.0 * hurst.h
        )
        # g(x -/+ w) evaluation points, shared across calls; writing the
        # lag integrand as 2 int f g - int f g(.-w) - int f g(.+w) keeps
        # every x-integral on the support of f
        self.shift_minus = self.x_nodes[None, :] - self.w_nodes[:, None]
        self.shift_plus = self.x_nodes[None, :] + self.w_nodes[:, None]
        self.const = hurst.increment_const

    def spatial(self, f, g, s):
        fv = f(s, self.x_nodes)
        g_minus = g(s, self.shift_minus.ravel()).reshape(self.shift_minus.shape)
        g_plus = g(s, self.shift_plus.ravel()).reshape(self.shift_plus.shape)
        gv = fv if g is f else g(s, self.x_nodes)
        fg = float(np.dot(fv * gv, self.x_w))
        fw = fv * self.x_w
        inner = 2.0 * fg - g_minus @ fw - g_plus @ fw
        # 2 * int_0^diam w^(2H-2) inner(w) dw  +  exact tail where the
        # shifted copies no longer overlap (inner -> 2 int f g)
        return self.const * (
            2.0 * float(np.dot(inner, self.w_w))
            + 4.0 * fg * self.tail_factor
        )


class _MarchaudPlan:
    def __init__(self, hurst, space_support, x_far=128.0):
        self.beta = hurst.beta
        self.kappa = self.beta / special.gamma(1.0 - self.beta)
        lo, hi = space_support
        self.lo, self.hi = lo, hi
        self.x_far = x_far
        # near nodes cover the supports plus a margin; far nodes reach
        # the analytic-tail handoff at -x_far
        self.xn_nodes, self.xn_w = _supports_xnodes((lo - 2.0, hi + 2.0))
        far_edges = -edges_geometric(2.0 - lo, x_far, 10)[::-1]
        self.xf_nodes, self.xf_w = panel_nodes(far_edges, 16)
        # lag quadrature for the near nodes: substitution near 0
        # (difference vanishes linearly), geometric panels to the point
        # where the forward value has decayed, exact power tail
        r_hi = (hi + 2.0) - (lo - 2.0) + 2.0
        r_small, rw_small = singular_power_nodes(
            0.5, -1.0 - self.beta, 1, levels=26, n=14
        )
        r_big, rw_big = panel_nodes(edges_geometric(0.5, r_hi, 24), 16)
        self.r_nodes = np.concatenate([r_small, r_big])
        self.r_w = np.concatenate(
            [rw_small, rw_big * r_big ** (-1.0 - self.beta)]
        )
        self.r_tail = r_hi ** (-self.beta) / self.beta
        self.fwd = self.xn_nodes[None, :] + self.r_nodes[:, None]
        # support nodes for the dual form used at far-left positions
        self.y_nodes, self.y_w = _supports_xnodes((lo, hi))
        self.dual_kernel = (
            self.y_nodes[None, :] - self.xf_nodes[:, None]
        ) ** (-1.0 - self.beta)
        self.const = hurst.marchaud_const

    def _derivative_pair(self, f, s):
        fv = f(s, self.xn_nodes)
        ffwd = f(s, self.fwd.ravel()).reshape(self.fwd.shape)
        near = self.kappa * (
            (fv[None, :] - ffwd).T @ self.r_w + fv * self.r_tail
        )
        yv = f(s, self.y_nodes)
        far = -self.kappa * (self.dual_kernel @ (yv * self.y_w))
        moments = np.array(
            [
                np.dot(yv, self.y_w),
                np.dot(self.y_nodes * yv, self.y_w),
                np.dot(self.y_nodes**2 * yv, self.y_w),
            ]
        )
        return near, far, moments

    def spatial(self, f, g, s):
        nf, ff, mf = self._derivative_pair(f, s)
        if g is f:
            ng, fg_, mg = nf, ff, mf
        else:
            ng, fg_, mg = self._derivative_pair(g, s)
        direct = float(np.dot(nf * ng, self.xn_w)) + float(
            np.dot(ff * fg_, self.xf_w)
        )
        # analytic tail of the product integral beyond -x_far, from
        # (y + s)^(-1-b) = s^(-1-b) (1 - (1+b) y/s + (1+b)(2+b)/2 (y/s)^2 ...)
        # weighted by the moments of f and g
        b, S = self.beta, self.x_far
        c0 = mf[0] * mg[0]
        c1 = (1.0 + b) * (mf[0] * mg[1] + mf[1] * mg[0])
        c2 = 0.5 * (1.0 + b) * (2.0 + b) * (
            mf[0] * mg[2] + mf[2] * mg[0]
        ) + (1.0 + b) ** 2 * mf[1] * mg[1]
        tail = self.kappa**2 * (
            c0 * S ** (-1.0 - 2 * b) / (1.0 + 2 * b)
            - c1 * S ** (-2.0 - 2 * b) / (2.0 + 2 * b)
            + c2 * S ** (-3.0 - 2 * b) / (3.0 + 2 * b)
        )
        return self.const * (direct + tail)


_PLANS = {
    "fourier": _FourierPlan,
    "increment": _IncrementPlan,
    "marchaud": _MarchaudPlan,
}


def inner_product(
    phi,
    psi,
    hurst,
    form="fourier",
    *,
    time_support,
    space_support,
    xi_max=60.0,
    s_panels=3,
    s_nodes=16,
):
    """Inner product of two space-time test functions in the noise space.

    Parameters
    ----------
    phi, psi : callable
        Samplers phi(s, x) with scalar s and vector x, smooth with rapid
        decay.  space_support must cover the region where either function
        is above ~1e-17 in absolute value.
    form : {"fourier", "marchaud", "increment"}
        Which of the three equivalent representations to integrate.
    time_support : (float, float)
        Interval containing the union of the time supports.
    space_support : (float, float)
        Common effective spatial support.

    The three forms agree within quadrature tolerance (~1e-7 relative on
    smooth rapidly decaying inputs); that agreement is what pins the
    constants attached to the Hurst index.
    """
    if form not in _PLANS:
        raise ValueError(f"unknown form {form!r}")
    if form == "fourier":
        plan = _FourierPlan(hurst, space_support, xi_max)
    else:
        plan = _PLANS[form](hurst, space_support)
    s_nodes_arr, s_w = panel_nodes(
        edges_linear(*time_support, s_panels), s_nodes
    )
    vals = np.array([plan.spatial(phi, psi, s) for s in s_nodes_arr])
    return float(np.dot(vals, s_w))


# ----------------------------
# Marchaud fractional derivative
# ----------------------------

def marchaud_derivative(
    f, beta, x, eps_cutoff=0.25, *, decay_span=40.0, levels=5, rtol=1e-8
):
    """One-sided (right) fractional derivative of order beta at x.

    Computes (beta/Gamma(1-beta)) * int_eps^inf (f(x) - f(x+r)) r^(-1-beta) dr
    on the cutoff sequence eps_cutoff * 2^-k and removes the cutoff by
    Richardson extrapolation.  The truncation error expands in powers
    eps^(1-beta), eps^(2-beta), eps^(3-beta); those three are eliminated.

    decay_span bounds the window beyond which |f(x + r)| is negligible;
    the remaining exact power tail of r^(-1-beta) is added in closed form.

    Raises RuntimeError when the extrapolation table does not settle to
    rtol, with the table attached for diagnosis.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"order must be in (0, 1), got {beta}")
    kappa = beta / special.gamma(1.0 - beta)
    r_max = decay_span
    fx = float(np.asarray(f(np.array([x]))).ravel()[0])

    def truncated(eps):
        r, w = panel_nodes(edges_geometric(eps, r_max, 48), 24)
        vals = (fx - np.asarray(f(x + r))) * r ** (-1.0 - beta)
        return kappa * (float(np.dot(vals, w)) + fx * r_max**-beta / beta)

    eps_seq = eps_cutoff * 2.0 ** -np.arange(levels + 3.0)
    table = [np.array([truncated(e) for e in eps_seq])]
    for j in range(1, 4):
        fac = 2.0 ** -(j - beta)
        prev = table[-1]
        table.append((prev[1:] - fac * prev[:-1]) / (1.0 - fac))
    best = table[-1]
    err = abs(best[-1] - best[-2])
    scale = max(abs(best[-1]), 1e-30)
    if err > rtol * scale + 1e-14:
        raise RuntimeError(
            "cutoff extrapolation did not converge: "
            f"last corrections {best[-3:]}, residual {err:.3e}"
        )
    return float(best[-1])


# ----------------------------
# Sampling
# ----------------------------

@dataclass(frozen=True)
class NoiseRealization:
    """Noise increments on a grid with full seed provenance.

    increments[i, j] is the mass of W over the cell
    [t_i, t_{i+1}) x [x_j, x_j + dx), so each row has variance dt times
    the stationary fractional covariance at lag 0.
    mollification_eps = 0 means raw noise.
    """

    grid: Grid
    hurst: Hurst
    increments: np.ndarray
    seed: int
    path_index: int = 0
    mollification_eps: float = 0.0
    warnings: tuple = ()

    def save(self, path):
        from . import fieldio

        fieldio.write_field(
            path,
            self.increments,
            self.grid,
            self.hurst,
            seed=self.seed,
            eps=self.mollification_eps,
        )

    def save_csv(self, path):
        from . import fieldio

        fieldio.write_csv(path, self.increments, self.grid)


def cell_autocovariance(lag, grid, hurst):
    """Covariance of same-row cell masses at the given cell lag.

    Second difference of the fractional profile over cells of width dx,
    times dt from the white time factor.
    """
    H2 = 2.0 * hurst.h
    m = np.abs(np.asarray(lag, dtype=float))
    second = np.abs(m + 1.0) ** H2 - 2.0 * m**H2 + np.abs(m - 1.0) ** H2
    return 0.5 * grid.dx**H2 * second * grid.dt


def resolve_workers(workers=None):
    """Worker count: explicit argument, else ROUGHHEAT_WORKERS, else 1."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("ROUGHHEAT_WORKERS", "")
    if env.strip():
        return max(1, int(env))
    return 1


class NoiseSampler:
    """Circulant-embedding sampler for a fixed (grid, hurst).

    The embedding is prepared once; each path is drawn from its own
    counter-based generator keyed by (seed, path index), so results do
    not depend on how paths are distributed over workers.
    """

    def __init__(self, grid, hurst):
        self.grid = grid
        self.hurst = hurst
        nx = grid.nx
        self.m = 2 * (nx - 1)
        lags = np.minimum(np.arange(self.m), self.m - np.arange(self.m))
        row = cell_autocovariance(lags, grid, hurst) / grid.dt
        eig = sfft.fft(row).real
        floor = -1e-9 * eig.max()
        if eig.min() < floor:
            raise RuntimeError(
                "circulant embedding produced a significantly negative "
                f"eigenvalue ({eig.min():.3e}) on grid {grid}; this should "
                "not happen for H < 1/2 and indicates an internal error"
            )
        self.sqrt_eig = np.sqrt(np.clip(eig, 0.0, None))

    def _draw_rows(self, seed, path_index):
        ss = np.random.SeedSequence(seed, spawn_key=(path_index,))
        rng = np.random.Generator(np.random.Philox(ss))
        nt, m = self.grid.nt, self.m
        half = m // 2
        a = rng.standard_normal((nt, m))
        y = np.empty((nt, m), dtype=complex)
        y[:, 0] = self.sqrt_eig[0] * a[:, 0]
        y[:, half] = self.sqrt_eig[half] * a[:, half]
        k = np.arange(1, half)
        coef = self.sqrt_eig[k] / math.sqrt(2.0)
        y[:, k] = coef * (a[:, k] + 1j * a[:, m - k])
        y[:, m - k] = np.conj(y[:, k])
        return y

    def _finish(self, y):
        x = sfft.fft(y, axis=-1).real / math.sqrt(self.m)
        return x[..., : self.grid.nx] * math.sqrt(self.grid.dt)

    def sample(self, seed, path_index=0):
        incr = self._finish(self._draw_rows(seed, path_index))
        return NoiseRealization(
            grid=self.grid,
            hurst=self.hurst,
            increments=incr,
            seed=int(seed),
            path_index=int(path_index),
        )

    def sample_batch(self, seed, n_paths, workers=None):
        """Stacked increments, shape (n_paths, nt, nx), path-indexed."""
        workers = resolve_workers(workers)
        out = np.empty((n_paths, self.grid.nt, self.grid.nx))

        def fill(bounds):
            lo, hi = bounds
            block = np.stack(
                [self._draw_rows(seed, p) for p in range(lo, hi)]
            )
            out[lo:hi] = self._finish(block)

        chunk = max(1, -(-n_paths // (4 * workers)))
        bounds = [
            (lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)
        ]
        if workers == 1:
            for b in bounds:
                fill(b)
        else:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                list(ex.map(fill, bounds))
        return out


def sample_noise(grid, hurst, seed, path_index=0):
    """One noise realization; see NoiseSampler for the batched form."""
    return NoiseSampler(grid, hurst).sample(seed, path_index)


def sample_noise_batch(grid, hurst, seed, n_paths, workers=None):
    return NoiseSampler(grid, hurst).sample_batch(seed, n_paths, workers)


# ----------------------------
# Mollification
# ----------------------------

def heat_smoothing_kernel(grid, eps):
    """Discrete spatial heat kernel at time eps, mass renormalized to 1.

    Trapezoid weights on the circular distance of the grid, so circular
    convolution against it preserves the slice sum exactly.
    """
    nx, dx = grid.nx, grid.dx
    j = np.arange(nx)
    dist = np.minimum(j, nx - j) * dx
    kern = np.exp(-(dist**2) / (4.0 * eps)) / math.sqrt(4.0 * math.pi * eps)
    return kern / kern.sum()


def mollify(noise, eps):
    """Spatially smoothed copy of a realization, smoothing scale eps.

    Each time slice is circularly convolved with the renormalized heat
    kernel at time eps.  The wrap at the window edge is negligible as
    long as sqrt(2 eps) is small against the window width.  Repeated
    mollification composes additively in eps (heat semigroup), which is
    why mollification_eps accumulates.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    grid = noise.grid
    warnings = noise.warnings
    if eps < grid.dx**2 / 4.0:
        warnings = warnings + (
            f"mollification eps={eps:g} below dx^2/4={grid.dx ** 2 / 4.0:g}; "
            "kernel is unresolved on this grid",
        )
    kern = heat_smoothing_kernel(grid, eps)
    smoothed = sfft.irfft(
        sfft.rfft(noise.increments, axis=-1) * sfft.rfft(kern)[None, :],
        n=grid.nx,
        axis=-1,
    )
    return replace(
        noise,
        increments=smoothed,
        mollification_eps=noise.mollification_eps + eps,
        warnings=warnings,
    )
