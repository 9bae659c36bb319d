"""Heat kernel differences and the integral bounds they satisfy.

Everything here is deterministic quadrature; no randomness enters.  The
module has two layers:

* closed-form evaluators for the kernel, its first and second spatial
  differences, and the rescaled unit-time profiles;
* check_* sweeps that integrate those differences against the singular
  weights |h|^(2H-2) and |h|^(-1-2*order) and assert the decay and
  scaling the rest of the package leans on: exact scaling exponents
  where a closed form exists, bounded last-decade ratios where only a
  constant is claimed.

Each sweep returns a CheckReport carrying the raw probe values, so a
failed assertion still leaves the numbers on the table.  Tolerances are
factor 2 for trend assertions and 1e-3 on fitted exponents; see the test
suite for the independently derived golden values pinning the
quadratures themselves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .fieldio import write_table_csv
from .quadrature import (
    edges_geometric,
    edges_linear,
    panel_nodes,
    singular_power_nodes,
)

__all__ = [
    "heat_kernel",
    "difference",
    "double_difference",
    "profile_difference",
    "profile_double_difference",
    "cosine_moment",
    "smoothing_average",
    "total_difference_energy",
    "total_box_energy",
    "profile_energy",
    "difference_energy",
    "box_profile_energy",
    "admissibility_integral",
    "CheckReport",
    "check_weighted_smoothing",
    "check_oscillatory_decay",
    "check_difference_energy_scaling",
    "check_difference_energy_profile",
    "check_box_energy_profile",
    "check_weight_admissibility",
    "run_all_checks",
]


# ----------------------------
# Kernel and its differences
# ----------------------------

def heat_kernel(t, x):
    """G_t(x) = exp(-x^2/(4t)) / sqrt(4 pi t).  Positive times only."""
    t = float(t)
    if t <= 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def difference(t, x, h):
    """First spatial difference G_t(x+h) - G_t(x)."""
    x = np.asarray(x, dtype=float)
    return heat_kernel(t, x + h) - heat_kernel(t, x)


def double_difference(t, x, y, h):
    """Second difference G_t(x+y+h) - G_t(x+y) - G_t(x+h) + G_t(x).

    Equals difference(t, x+y, h) - difference(t, x, h) and is symmetric
    under exchanging y and h.
    """
    x = np.asarray(x, dtype=float)
    return (
        heat_kernel(t, x + y + h)
        - heat_kernel(t, x + y)
        - heat_kernel(t, x + h)
        + heat_kernel(t, x)
    )


def profile_difference(x, h):
    """Unit-scale profile exp(-(x+h)^2) - exp(-x^2).

    This is sqrt(pi) * difference(1/4, x, h); the quarter-time slice is
    the natural normalization because G_{1/4}(x) = exp(-x^2)/sqrt(pi).
    """
    x = np.asarray(x, dtype=float)
    out = np.exp(-((x + h) ** 2)) - np.exp(-(x * x))
    return float(out) if out.ndim == 0 else out


def profile_double_difference(x, y, h):
    """Unit-scale second difference, sqrt(pi) * double_difference(1/4, .)."""
    return profile_difference(x + y, h) - profile_difference(x, h)


# ----------------------------
# Oscillatory moment
# ----------------------------

def cosine_moment(x, order, cutoff=8.0):
    """int_0^inf exp(-eta^2) eta^order cos(x eta) d eta.

    The power factor goes through the singular-power substitution on a
    first panel no wider than a quarter period; after that the panels
    are capped at half the local period so the cosine never outruns the
    Gauss rule.  Beyond cutoff the Gaussian leaves less than
    exp(-cutoff^2).  Closed form for reference:
    Gamma((order+1)/2)/2 * 1F1((order+1)/2; 1/2; -x^2/4).
    """
    x = abs(float(x))
    order = float(order)
    if order <= -1.0:
        raise ValueError(f"order must exceed -1, got {order}")
    w0 = 0.5 if x == 0.0 else min(0.5, 0.25 * math.pi / x)
    eta, wts = singular_power_nodes(w0, order, 0.0, levels=24, n=16)
    head = float(np.dot(np.exp(-eta * eta) * np.cos(x * eta), wts))
    width = 0.5 if x == 0.0 else min(0.5, 0.5 * math.pi / x)
    n_panels = max(8, int(math.ceil((cutoff - w0) / width)))
    eta, wts = panel_nodes(edges_linear(w0, cutoff, n_panels), 16)
    rest = float(
        np.dot(np.exp(-eta * eta) * eta**order * np.cos(x * eta), wts)
    )
    return head + rest


def _cosine_moment_closed(x, order):
    a = 0.5 * (order + 1.0)
    return float(
        0.5 * special.gamma(a) * special.hyp1f1(a, 0.5, -0.25 * x * x)
    )


# ----------------------------
# Weighted smoothing
# ----------------------------

def smoothing_average(t, z, exponent):
    """Heat average of the shifted weight ratio, lam(z)^-1 (G_t * lam)(z).

    For the power weight lam(x) = c (1+x^2)^(-exponent) the normalization
    cancels and the integrand is G_t(u) * ((1+z^2)/(1+(z-u)^2))^exponent,
    which matches Weight.shifted_ratio.  Linear panels across the
    Gaussian support, fine enough to resolve the ratio bump when z sits
    inside it.
    """
    t = float(t)
    if t <= 0:
        raise ValueError(f"smoothing average needs t > 0, got {t}")
    z = float(z)
    span = 14.0 * math.sqrt(t)
    width = min(0.5, 0.5 * math.sqrt(t))
    nodes, wts = panel_nodes(
        edges_linear(-span, span, int(math.ceil(2.0 * span / width))), 16
    )
    ratio = ((1.0 + z * z) / (1.0 + (z - nodes) ** 2)) ** exponent
    return float(np.dot(heat_kernel(t, nodes) * ratio, wts))


# ----------------------------
# Energy integrals, homogeneous weights
# ----------------------------

def _increment_weight_mass(order):
    """int_R (1 - cos v) |v|^(-1-2*order) dv = -2 Gamma(-2*order) cos(pi*order).

    Finite for order in (0, 1/2) u (1/2, 1); the pole at 1/2 is the
    degenerate white case and is rejected upstream.
    """
    return float(
        -2.0 * special.gamma(-2.0 * order) * math.cos(math.pi * order)
    )


def _half_line_power_grid(order, inner=0.5, outer=40.0, n_geo=20):
    # nodes/weights for int_0^outer g(h) h^(-1-2*order) dh with g = O(h^2);
    # the caller adds the closed tail for its own g beyond outer
    power = -1.0 - 2.0 * order
    h0, w0 = singular_power_nodes(inner, power, 2.0, levels=24, n=12)
    h1, w1 = panel_nodes(edges_geometric(inner, outer, n_geo), 16)
    return np.concatenate([h0, h1]), np.concatenate([w0, w1 * h1**power])


def total_difference_energy(t, order):
    """Space-integrated squared first difference against |h|^(-1-2*order).

    The x-integral collapses by the kernel self-convolution identity
    int G_t(x+h) G_t(x) dx = G_{2t}(h), leaving
    (4/sqrt(8 pi t)) int_0^inf (1 - exp(-h^2/(8t))) h^(-1-2*order) dh.
    Exact value 2 * 8^(-order) * Gamma(1-order) / (order * sqrt(8 pi))
    times t^(-(1/2+order)); the quadrature here is the check, the closed
    form lives in the reports and tests.
    """
    t = float(t)
    order = float(order)
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    if not 0.0 < order < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {order}")
    h, wts = _half_line_power_grid(order)
    head = float(np.dot(1.0 - np.exp(-h * h / (8.0 * t)), wts))
    tail = 40.0 ** (-2.0 * order) / (2.0 * order)  # g = 1 past outer
    return 4.0 / math.sqrt(8.0 * math.pi * t) * (head + tail)


class _BoxScalingPlan:
    """Frozen grids for the double-difference energy at fixed orders.

    The same node set serves every t so that the fitted scaling exponent
    is measured, not built in.  y panels are fine within 24 of the
    moving bump at y = h (six standard deviations at the largest probe
    time) and geometric elsewhere; both half-lines carry their power
    weight in the panel weights, the cells at the origin go through the
    singular-power substitution.
    """

    def __init__(self, shift_order, step_order):
        self.shift_order = float(shift_order)
        self.step_order = float(step_order)
        for name, val in (("shift", self.shift_order), ("step", self.step_order)):
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} order must lie in (0, 1), got {val}")
        a, b = self.shift_order, self.step_order
        hc, hw = singular_power_nodes(0.5, -1.0 - 2.0 * b, 2.0, levels=20, n=12)
        hg, wg = panel_nodes(edges_geometric(0.5, 40.0, 20), 16)
        self.h = np.concatenate([hc, hg])
        self.h_wts = np.concatenate([hw, wg * hg ** (-1.0 - 2.0 * b)])

        yc, ycw = singular_power_nodes(0.5, -1.0 - 2.0 * a, 2.0, levels=18, n=10)
        ys, yw, idx = [], [], []
        for i, hi in enumerate(self.h):
            lo, up = max(0.5, hi - 24.0), min(80.0, hi + 24.0)
            pts = {0.5, 80.0}
            pts.update(
                np.linspace(lo, up, int(math.ceil((up - lo) / 0.5)) + 1).tolist()
            )
            if lo > 0.5 * 1.0001:
                pts.update(np.geomspace(0.5, lo, 14).tolist())
            if up < 80.0 * 0.9999:
                pts.update(np.geomspace(up, 80.0, 8).tolist())
            yn, ywn = panel_nodes(np.array(sorted(pts)), 16)
            ys.append(np.concatenate([yc, yn]))
            yw.append(np.concatenate([ycw, ywn * yn ** (-1.0 - 2.0 * a)]))
            idx.append(np.full(yc.size + yn.size, i))
        self.y = np.concatenate(ys)
        self.y_wts = np.concatenate(yw)
        self.h_of_y = self.h[np.concatenate(idx)]
        self.idx = np.concatenate(idx)

    def evaluate(self, t):
        t = float(t)
        if t <= 0:
            raise ValueError(f"need t > 0, got {t}")
        a, b = self.shift_order, self.step_order
        c = 1.0 / math.sqrt(8.0 * math.pi * t)
        s = 8.0 * t

        def g2t(v):
            return c * np.exp(-v * v / s)

        y, h = self.y, self.h_of_y
        q = 2.0 * c - 2.0 * g2t(h) - 2.0 * g2t(y) + g2t(y + h) + g2t(y - h)
        inner = np.bincount(self.idx, weights=q * self.y_wts, minlength=self.h.size)
        # past y = 80 the three Gaussians are dead and q -> 2(G(0) - G(h))
        inner = inner + (2.0 * c - 2.0 * g2t(self.h)) * 80.0 ** (-2.0 * a) / (2.0 * a)
        core = float(np.dot(inner, self.h_wts))
        # past h = 40: inner -> half the single-difference energy plus the
        # bump integral E[(h+Z)^(-1-2a)], Var Z = 4t, kept to second order
        far = 0.5 * total_difference_energy(t, a)
        tail = far * 40.0 ** (-2.0 * b) / (2.0 * b)
        tail += 40.0 ** (-1.0 - 2.0 * a - 2.0 * b) / (1.0 + 2.0 * a + 2.0 * b)
        tail += (
            2.0 * t * (1.0 + 2.0 * a) * (2.0 + 2.0 * a)
            * 40.0 ** (-3.0 - 2.0 * a - 2.0 * b) / (3.0 + 2.0 * a + 2.0 * b)
        )
        return 8.0 * (core + tail)


def total_box_energy(t, shift_order, step_order):
    """Space-integrated squared double difference against the pair of
    homogeneous weights |y|^(-1-2*shift_order) |h|^(-1-2*step_order)."""
    return _BoxScalingPlan(shift_order, step_order).evaluate(t)


# ----------------------------
# Energy integrals, fractional weight
# ----------------------------

def _feature_edges(lo, hi, centers, fine=0.5, half_width=7.0, ratio=1.35):
    """Panel edges on [lo, hi] (an interval not containing 0): fine
    spacing within half_width of any center, geometric fill elsewhere."""
    pts = {float(lo), float(hi)}
    for c in centers:
        a, b = max(lo, float(c) - half_width), min(hi, float(c) + half_width)
        if b > a:
            k = int(math.ceil((b - a) / fine))
            pts.update(np.linspace(a, b, k + 1).tolist())
    base = sorted(pts)
    out = [base[0]]
    for e in base[1:]:
        g0, g1 = out[-1], e
        if g1 - g0 > 1.5 * fine:
            lo_a, hi_a = sorted((abs(g0), abs(g1)))
            n_gap = max(1, int(math.ceil(math.log(hi_a / lo_a) / math.log(ratio))))
            fill = np.geomspace(lo_a, hi_a, n_gap + 1)
            if g0 < 0:
                fill = -fill[::-1]
            out.extend(fill[1:].tolist())
        else:
            out.append(e)
    return np.asarray(out)


def _cross_energy(a, b, hurst):
    # int D(a,h) D(b,h) |h|^(2H-2) dh for the unit-scale profiles; the
    # product vanishes quadratically at h = 0, has Gaussian bumps at
    # h = -a and h = -b, and settles at exp(-a^2-b^2) far out
    power = 2.0 * hurst.h - 2.0
    extent = max(8.0, abs(a) + 8.0, abs(b) + 8.0)
    hc, wc = singular_power_nodes(1.0, power, 2.0, levels=24, n=12)
    pos = _feature_edges(1.0, extent, (-a, -b))
    neg = _feature_edges(-extent, -1.0, (-a, -b))
    hp, wp = panel_nodes(pos, 16)
    hn, wn = panel_nodes(neg, 16)
    h = np.concatenate([hc, -hc, hp, hn])
    wts = np.concatenate(
        [wc, wc, wp * np.abs(hp) ** power, wn * np.abs(hn) ** power]
    )
    g = profile_difference(a, h) * profile_difference(b, h)
    core = float(np.dot(g, wts))
    tail = (
        2.0 * math.exp(-a * a - b * b) * extent ** (power + 1.0) / -(power + 1.0)
    )
    return core + tail


def profile_energy(x, hurst):
    """F(x) = int |profile_difference(x, h)|^2 |h|^(2H-2) dh.

    Bounded by a constant times 1 ^ |x|^(2H-2); the unit-time field
    version difference_energy is a pure rescaling of this profile.
    """
    x = float(x)
    return _cross_energy(x, x, hurst)


def difference_energy(t, x, hurst):
    """F_t(x) = int |difference(t, x, h)|^2 |h|^(2H-2) dh.

    Computed on its own sqrt(t)-scaled grid, independent of the
    profile_energy code path; the exact relation
    F_t(x) = 2^(2H-3)/pi * t^(H-3/2) * F(x/(2 sqrt t))
    is asserted across probes in check_difference_energy_profile.
    """
    t = float(t)
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    x = abs(float(x))  # even in x
    sig = math.sqrt(2.0 * t)
    power = 2.0 * hurst.h - 2.0
    extent = x + 10.0 * sig
    u0 = min(1.0, sig)
    hc, wc = singular_power_nodes(u0, power, 2.0, levels=24, n=12)
    pos = _feature_edges(u0, extent, (-x,), fine=0.5 * sig, half_width=7.0 * sig)
    neg = _feature_edges(-extent, -u0, (-x,), fine=0.5 * sig, half_width=7.0 * sig)
    hp, wp = panel_nodes(pos, 16)
    hn, wn = panel_nodes(neg, 16)
    h = np.concatenate([hc, -hc, hp, hn])
    wts = np.concatenate(
        [wc, wc, wp * np.abs(hp) ** power, wn * np.abs(hn) ** power]
    )
    g = difference(t, x, h) ** 2
    core = float(np.dot(g, wts))
    tail = (
        2.0 * heat_kernel(t, x) ** 2 * extent ** (power + 1.0) / -(power + 1.0)
    )
    return core + tail


def box_profile_energy(x, hurst):
    """Double energy int int |profile_double_difference(x,y,h)|^2
    |h|^(2H-2) |y|^(2H-2) dh dy.

    Expanded bilinearly through _cross_energy: with a = x + y the inner
    h-integral is F(a,a) - 2 F(a,x) + F(x,x), which vanishes
    quadratically at y = 0 and approaches F(x,x) as |y| grows.  The far
    field is peeled off analytically: the constant part exactly, the
    O(|a|^(2H-2)) Laplace correction by a dedicated one-dimensional
    quadrature out to 1e4 plus a closed remainder.
    """
    x = abs(float(x))
    power = 2.0 * hurst.h - 2.0
    f_xx = _cross_energy(x, x, hurst)

    def q_of_y(y):
        a = x + y
        return (
            _cross_energy(a, a, hurst)
            - 2.0 * _cross_energy(a, x, hurst)
            + f_xx
        )

    far = 48.0 + 3.0 * x
    yc, wc = singular_power_nodes(1.0, power, 2.0, levels=20, n=10)
    pos = _feature_edges(1.0, far, (0.0,), fine=0.7, half_width=19.0 + x)
    neg = _feature_edges(-far, -1.0, (-x,), fine=0.7, half_width=19.0 + x)
    yp, wp = panel_nodes(pos, 16)
    yn, wn = panel_nodes(neg, 16)
    nodes = np.concatenate([yc, -yc, yp, yn])
    wts = np.concatenate(
        [wc, wc, wp * np.abs(yp) ** power, wn * np.abs(yn) ** power]
    )
    core = float(sum(w * q_of_y(y) for y, w in zip(nodes, wts)))
    # |y| > far: constant part of q integrates in closed form ...
    tail = f_xx * 2.0 * far ** (power + 1.0) / -(power + 1.0)
    # ... and the approach to it is kappa |x+y|^(2H-2) + O(|x+y|^(2H-4)),
    # kappa = sqrt(pi/2) + 2 sqrt(pi) exp(-x^2): bump energy of F(a,a)
    # plus twice the cross bump against the settled level of D(x, .)
    kappa = math.sqrt(0.5 * math.pi) + 2.0 * math.sqrt(math.pi) * math.exp(
        -x * x
    )
    yf, wf = panel_nodes(edges_geometric(far, 1.0e4, 30), 16)
    corr = float(
        np.dot(((yf + x) ** power + (yf - x) ** power) * yf**power, wf)
    )
    corr += 2.0 * 1.0e4 ** (2.0 * power + 1.0) / -(2.0 * power + 1.0)
    return core + tail + kappa * corr


# ----------------------------
# Weighted admissibility
# ----------------------------

def admissibility_integral(t, z, exponent, hurst):
    """int (1 ^ |x|^(2H-2)) * ((1+t z^2)/(1+t (z-x)^2))^exponent dx.

    The ratio factor is Weight.shifted_ratio at the rescaled arguments
    (sqrt(t) x, sqrt(t) z).  Exponents <= 1/2 make the bump at x = z
    non-integrable and are rejected.  Panels: linear across the weight
    kinks at +-1 and across the bump window, geometric ladders in both
    |x| and |x - z| so neither scale outruns its panels, closed power
    tail past the cutoff.
    """
    t = float(t)
    if t <= 0:
        raise ValueError(f"need t > 0, got {t}")
    z = abs(float(z))
    a = float(exponent)
    if a <= 0.5:
        raise ValueError(f"weight exponent must exceed 1/2, got {a}")
    rs = 1.0 / math.sqrt(t)
    xmax = min(1.0e7, max(1.0e4, 100.0 * z, 100.0 * rs))
    pts = {-xmax, xmax}
    pts.update(np.linspace(-1.0, 1.0, 9).tolist())
    ladder = np.geomspace(1.0, xmax, 40)
    pts.update(ladder.tolist())
    pts.update((-ladder).tolist())
    half = 30.0 * rs
    pts.update(
        np.clip(np.linspace(z - half, z + half, 121), -xmax, xmax).tolist()
    )
    for sgn in (-1.0, 1.0):
        d = np.geomspace(half, 2.0 * xmax, 40)
        pts.update(np.clip(z + sgn * d, -xmax, xmax).tolist())
    edges = np.array(sorted(pts))
    nodes, wts = panel_nodes(edges, 16)
    power = 2.0 * hurst.h - 2.0
    wgt = np.minimum(1.0, np.abs(nodes) ** power)
    ratio = ((1.0 + t * z * z) / (1.0 + t * (z - nodes) ** 2)) ** a
    core = float(np.dot(wgt * ratio, wts))
    tail = (
        2.0
        * (1.0 + t * z * z) ** a
        * t ** (-a)
        * xmax ** (power + 1.0 - 2.0 * a)
        / (2.0 * a - 1.0 - power)
    )
    return core + tail


# ----------------------------
# Reports
# ----------------------------

@dataclass(frozen=True)
class CheckReport:
    """Outcome of one quadrature sweep.

    probes are the sweep coordinates, tuples in the order of
    probe_names; values the computed quantities; assertion a plain
    statement of what passing required.  details keeps the diagnostics
    (fitted slopes, ratios, golden comparisons) that the assertion
    condensed into the single flag.
    """

    name: str
    probe_names: tuple
    probes: tuple
    values: tuple
    assertion: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lemma": self.name,
            "probes": [list(map(float, p)) for p in self.probes],
            "values": [float(v) for v in self.values],
            "assertion": self.assertion,
            "pass": bool(self.passed),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        columns = {
            nm: [float(p[i]) for p in self.probes]
            for i, nm in enumerate(self.probe_names)
        }
        columns["value"] = [float(v) for v in self.values]
        write_table_csv(path, columns)


# ----------------------------
# Check sweeps
# ----------------------------

_SMOOTH_T = (1.0e-4, 1.0e-3, 1.0e-2, 0.1, 0.3, 1.0)


def check_weighted_smoothing(exponent, t_max=1.0):
    """Heat averages of the power weight stay comparable to the weight.

    Sweeps smoothing_average over log-spaced times up to t_max and
    dyadic positions up to 1024.  Passing needs a uniformly bounded
    sweep (the constant 4 is generous; the true sup at the default
    exponent is under 1.3) and no growth in the far field.
    """
    exponent = float(exponent)
    ts = [t_max * s for s in _SMOOTH_T]
    zs = [0.0] + [float(2**k) for k in range(11)]
    probes = tuple((t, z) for t in ts for z in zs)
    values = tuple(smoothing_average(t, z, exponent) for t, z in probes)
    sup = max(values)
    by_t = {t: {} for t in ts}
    for (t, z), v in zip(probes, values):
        by_t[t][z] = v
    far_ratio = max(by_t[t][1024.0] / by_t[t][128.0] for t in ts)
    arg_sup = probes[values.index(sup)]
    passed = sup <= 4.0 and far_ratio <= 2.0
    return CheckReport(
        name="weighted-smoothing-bound",
        probe_names=("t", "z"),
        probes=probes,
        values=values,
        assertion=(
            "sup of the weighted heat average over the probe grid is at "
            "most 4 and the far-field ratio value(t,1024)/value(t,128) "
            "is at most 2 for every t"
        ),
        passed=passed,
        details={
            "exponent": exponent,
            "max_value": sup,
            "far_ratio_max": far_ratio,
            "sup_at_largest_t": bool(arg_sup[0] == ts[-1]),
        },
    )


def check_oscillatory_decay(order):
    """The damped cosine moment decays like |x|^(-order-1).

    Sweeps cosine_moment over dyadic x up to 256 and scales by the
    claimed decay rate; passing needs the last decade of scaled
    magnitudes to stay within a factor 2 of the earlier maximum and the
    quadrature to agree with the confluent-hypergeometric closed form.
    """
    order = float(order)
    xs = [float(2**k) for k in range(9)]
    values = tuple(cosine_moment(x, order) for x in xs)
    # compare to the closed form only where it is resolvable in double
    # precision; at order 0 the Gaussian transform underflows past x ~ 50
    floor = 1.0e-12 * _cosine_moment_closed(0.0, order)
    closed_rel = max(
        abs(v / _cosine_moment_closed(x, order) - 1.0)
        for x, v in zip(xs, values)
        if abs(_cosine_moment_closed(x, order)) >= floor
    )
    scaled = [abs(v) * x ** (order + 1.0) for x, v in zip(xs, values)]
    last = max(scaled[6:])
    earlier = max(scaled[:6])
    passed = last <= 2.0 * earlier and closed_rel <= 1.0e-7
    return CheckReport(
        name="oscillatory-kernel-decay",
        probe_names=("x",),
        probes=tuple((x,) for x in xs),
        values=values,
        assertion=(
            "scaled magnitude |value| * x^(order+1) over {64,128,256} is "
            "at most twice its maximum over the earlier probes, and the "
            "quadrature matches the closed form to 1e-7"
        ),
        passed=passed,
        details={
            "order": order,
            "scaled": scaled,
            "closed_form_max_rel": closed_rel,
            # limit of the scaled magnitude along x -> inf
            "limit_const": special.gamma(order + 1.0)
            * math.sin(0.5 * math.pi * order),
        },
    )


_SCALING_T = (0.25, 0.5, 1.0, 2.0, 4.0)


def check_difference_energy_scaling(step_order, shift_order=None):
    """Exact power-law scaling of the homogeneous-weight energies.

    With only step_order, fits total_difference_energy against
    t^(-(1/2+order)); with shift_order as well, fits total_box_energy
    against t^(-(1/2+shift+step)).  The grids are frozen across t, so
    the fitted slope is an honest measurement.  Passing needs the slope
    within 1e-3 of the target; the closed-form amplitude and the exact
    dyadic homogeneity ratio are recorded alongside.
    """
    step_order = float(step_order)
    if shift_order is None:
        name = "difference-energy-scaling"
        target = -(0.5 + step_order)
        values = tuple(total_difference_energy(t, step_order) for t in _SCALING_T)
        amplitude = (
            2.0
            * 8.0**-step_order
            * special.gamma(1.0 - step_order)
            / (step_order * math.sqrt(8.0 * math.pi))
        )
        orders = {"step_order": step_order}
    else:
        shift_order = float(shift_order)
        name = "box-energy-scaling"
        target = -(0.5 + shift_order + step_order)
        plan = _BoxScalingPlan(shift_order, step_order)
        values = tuple(plan.evaluate(t) for t in _SCALING_T)
        s = shift_order + step_order + 0.5
        amplitude = (
            2.0
            / math.pi
            * _increment_weight_mass(shift_order)
            * _increment_weight_mass(step_order)
            * special.gamma(s)
            * 2.0**-s
        )
        orders = {"step_order": step_order, "shift_order": shift_order}
    slope = float(
        np.polyfit(np.log(_SCALING_T), np.log(values), 1)[0]
    )
    homogeneity = abs(values[3] / values[2] / 2.0**target - 1.0)
    passed = abs(slope - target) <= 1.0e-3
    return CheckReport(
        name=name,
        probe_names=("t",),
        probes=tuple((t,) for t in _SCALING_T),
        values=values,
        assertion=(
            "log-log slope of the energy against t lies within 1e-3 of "
            f"{target}"
        ),
        passed=passed,
        details={
            **orders,
            "slope": slope,
            "target": target,
            "amplitude_rel_err": abs(values[2] / amplitude - 1.0),
            "homogeneity_rel_err": homogeneity,
        },
    )


_PROFILE_X = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
_FIELD_T = (0.0625, 1.0, 4.0)
_FIELD_X = (0.0, 1.0, 4.0, 16.0)


def check_difference_energy_profile(hurst):
    """Decay of the single-difference energy in x, and its t-scaling.

    The quarter-time rows come from the unit-scale profile quadrature,
    the remaining rows from the independent sqrt(t)-scaled one.  Passing
    needs: the two code paths to agree through the exact rescaling
    identity to 1e-6; the scaled profile values F * x^(2-2H) to be
    stable (no rise beyond 5 percent, no drop past factor 2) from x = 4
    on; and every field row to sit under the envelope
    2 * min(t^(H-3/2), |x|^(2H-2)/sqrt(t)).
    """
    H = hurst.h
    scale = 2.0 ** (2.0 * H - 3.0) / math.pi
    prof = {x: profile_energy(x, hurst) for x in _PROFILE_X}
    probes = [(0.25, x) for x in _PROFILE_X]
    values = [prof[x] / math.pi for x in _PROFILE_X]
    identity_rel = []
    envelope = []
    for t in _FIELD_T:
        for x in _FIELD_X:
            v = difference_energy(t, x, hurst)
            probes.append((t, x))
            values.append(v)
            ref = scale * t ** (H - 1.5) * profile_energy(
                x / (2.0 * math.sqrt(t)), hurst
            )
            identity_rel.append(abs(v / ref - 1.0))
            env = t ** (H - 1.5)
            if x > 0:
                env = min(env, x ** (2.0 * H - 2.0) / math.sqrt(t))
            envelope.append(v / env)
    scaled = {
        x: prof[x] / math.pi * x ** (2.0 - 2.0 * H) for x in _PROFILE_X if x >= 4.0
    }
    keys = sorted(scaled)
    trend = [scaled[b] / scaled[a] for a, b in zip(keys, keys[1:])]
    identity_max = max(identity_rel)
    envelope_max = max(envelope)
    passed = (
        identity_max <= 1.0e-6
        and all(0.5 <= r <= 1.05 for r in trend)
        and envelope_max <= 2.0
    )
    return CheckReport(
        name="difference-energy-decay",
        probe_names=("t", "x"),
        probes=tuple(probes),
        values=tuple(values),
        assertion=(
            "profile and field quadratures agree through the exact "
            "t-rescaling to 1e-6; scaled decay values are stable from "
            "x = 4 on; field values sit under twice the two-branch "
            "envelope"
        ),
        passed=passed,
        details={
            "identity_max_rel": identity_max,
            "scaled_trend_ratios": trend,
            "envelope_max": envelope_max,
            # scaled values approach sqrt(pi/2)/pi from above
            "scaled_limit": math.sqrt(0.5 * math.pi) / math.pi,
        },
    )


_BOX_X = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def check_box_energy_profile(hurst):
    """Decay of the double-difference energy in x.

    Passing needs the sweep bounded by 50 and the scaled values
    F2 * x^(2-2H) within an overall factor 2 of each other from x = 4
    on; no constant is pinned beyond that, the golden quadrature values
    live in the test suite.
    """
    H = hurst.h
    values = tuple(box_profile_energy(x, hurst) for x in _BOX_X)
    scaled = {
        x: v * x ** (2.0 - 2.0 * H) for x, v in zip(_BOX_X, values) if x >= 4.0
    }
    spread = max(scaled.values()) / min(scaled.values())
    sup = max(values)
    passed = sup <= 50.0 and spread <= 2.0
    return CheckReport(
        name="box-energy-decay",
        probe_names=("x",),
        probes=tuple((x,) for x in _BOX_X),
        values=values,
        assertion=(
            "sweep bounded by 50 and scaled decay values within an "
            "overall factor 2 from x = 4 on"
        ),
        passed=passed,
        details={"scaled": scaled, "scaled_spread": spread, "max_value": sup},
    )


_ADMISS_T = (1.0e-8, 1.0e-4, 1.0e-2, 0.1, 0.5, 1.0)
_ADMISS_Z = (0.0, 1.0, 2.0, 10.0, 100.0, 1000.0, 10000.0)


def check_weight_admissibility(hurst, exponent=None, t_max=1.0):
    """Admissibility of the power weight under the heat flow.

    At the critical exponent 1 - H the sweep must stay bounded: the
    t -> 0 rows sit on the exact plateau (the weight-ratio factor drops
    out), the largest-z ratio levels off.  Above the critical exponent
    the sweep must instead grow along z = 10^k at the rate
    z^(2*exponent - 2 + 2H), checked decade by decade within 20 percent;
    the linear-in-|z| reading of that rate would not grow at all, which
    is the reason the rate is stated through 1 + z^2.
    """
    H = hurst.h
    a = 1.0 - H if exponent is None else float(exponent)
    ts = [t_max * s for s in _ADMISS_T]
    probes = tuple((t, z) for t in ts for z in _ADMISS_Z)
    values = tuple(
        admissibility_integral(t, z, a, hurst) for t, z in probes
    )
    table = dict(zip(probes, values))
    plateau = 2.0 * (2.0 - 2.0 * H) / (1.0 - 2.0 * H)
    plateau_rel = max(
        abs(table[(t, z)] / plateau - 1.0)
        for t, z in probes
        if t == ts[0] and t * z * z <= 0.05
    )
    details = {"exponent": a, "plateau_max_rel": plateau_rel}
    decades = [10.0, 100.0, 1000.0, 10000.0]
    seq = [table[(ts[-1], z)] for z in decades]
    if a <= 1.0 - H + 1.0e-12:
        far_ratio = seq[-1] / seq[-2]
        sup = max(values)
        passed = plateau_rel <= 0.05 and far_ratio <= 1.5 and sup <= 5.0 * plateau
        assertion = (
            "t -> 0 rows sit on the exact plateau within 5 percent, the "
            "far decade ratio value(T,1e4)/value(T,1e3) is at most 1.5, "
            "and the sweep stays under 5 times the plateau"
        )
        details.update({"far_ratio": far_ratio, "max_value": sup})
    else:
        rate = 10.0 ** (2.0 * a - 2.0 + 2.0 * H)
        ratios = [b / v for v, b in zip(seq, seq[1:])]
        passed = (
            plateau_rel <= 0.05
            and all(b > v for v, b in zip(seq, seq[1:]))
            and all(abs(r / rate - 1.0) <= 0.2 for r in ratios)
        )
        assertion = (
            "t -> 0 rows sit on the exact plateau within 5 percent and "
            "the values at z = 10^k grow monotonically with each decade "
            "ratio within 20 percent of the predicted rate"
        )
        details.update({"decade_ratios": ratios, "predicted_ratio": rate})
    return CheckReport(
        name=(
            "weight-admissibility"
            if a <= 1.0 - H + 1.0e-12
            else "weight-admissibility-sharpness"
        ),
        probe_names=("t", "z"),
        probes=probes,
        values=values,
        assertion=assertion,
        passed=passed,
        details=details,
    )


def run_all_checks(hurst, t_max=1.0):
    """Every kernel-side sweep at the given Hurst index, in reading order."""
    return (
        check_weighted_smoothing(1.0 - hurst.h, t_max),
        check_oscillatory_decay(1.0 - 2.0 * hurst.h),
        check_difference_energy_scaling(hurst.beta),
        check_difference_energy_scaling(hurst.beta, shift_order=hurst.beta),
        check_difference_energy_profile(hurst),
        check_box_energy_profile(hurst),
        check_weight_admissibility(hurst, t_max=t_max),
        check_weight_admissibility(hurst, exponent=1.0 - hurst.h + 0.2, t_max=t_max),
    )
