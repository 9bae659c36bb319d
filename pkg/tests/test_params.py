"""Parameter objects: validation and the constants attached to H.

Frozen reference values come from tests/oracles/constants_oracle.py
(mpmath, 30 digits, independent routes).
"""

import math

import numpy as np
import pytest
from scipy import integrate

from roughheat import Grid, Hurst, Weight

# oracle: tests/oracles/constants_oracle.py
ORACLE = {
    0.3: dict(
        c1=0.11504819084081605,
        c2=0.7228691023086085,
        kappa=4.3268511088251926,
        weight_const=0.15952390094096952,
        increment=0.06,
    ),
    0.35: dict(
        c1=0.1288523256153892,
        c2=0.80960303910253326,
        kappa=3.9565574343614572,
        weight_const=0.12560332765636876,
        increment=0.0525,
    ),
    0.42: dict(
        c1=0.14530821836358116,
        c2=0.91299846263449613,
        kappa=3.6593577736750444,
        weight_const=0.072280685856121958,
        increment=0.0336,
    ),
}


@pytest.mark.parametrize("bad", [0.25, 0.5, 0.1, 0.75, -0.3, 1.0])
def test_hurst_rejects_outside_interval(bad):
    with pytest.raises(ValueError):
        Hurst(bad)


@pytest.mark.parametrize("h", sorted(ORACLE))
def test_hurst_constants_match_oracle(h):
    hp = Hurst(h)
    ref = ORACLE[h]
    assert hp.spectral_const == pytest.approx(ref["c1"], rel=1e-14)
    assert hp.marchaud_const == pytest.approx(ref["c2"], rel=1e-11)
    assert hp.variance_scale == pytest.approx(ref["kappa"], rel=1e-14)
    assert hp.weight_const == pytest.approx(ref["weight_const"], rel=1e-14)
    assert hp.increment_const == pytest.approx(ref["increment"], rel=1e-15)


@pytest.mark.parametrize("h", sorted(ORACLE))
def test_marchaud_const_integral_equals_gamma_closed_form(h):
    # the defining integral is redundant with Gamma(2H+1) sin(pi H);
    # pin the redundancy so a regression in either route is caught
    hp = Hurst(h)
    closed = math.gamma(2 * h + 1) * math.sin(math.pi * h)
    assert hp.marchaud_const == pytest.approx(closed, rel=1e-11)
    assert hp.marchaud_const == pytest.approx(
        2.0 * math.pi * hp.spectral_const, rel=1e-11
    )


def test_beta_is_half_minus_h():
    assert Hurst(0.3).beta == pytest.approx(0.2)
    assert Hurst(0.45).beta == pytest.approx(0.05)


def test_grid_nodes_and_cells():
    g = Grid(t_max=2.0, x_half_width=3.0, nt=4, nx=7)
    assert g.dt == pytest.approx(0.5)
    assert g.dx == pytest.approx(1.0)
    assert g.t_nodes.shape == (5,)
    assert g.x_nodes.shape == (7,)
    assert g.x_nodes[3] == pytest.approx(0.0)  # odd nx puts 0 on the grid
    assert g.shape == (4, 7)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(t_max=0.0, x_half_width=1.0, nt=2, nx=5)
    with pytest.raises(ValueError):
        Grid(t_max=1.0, x_half_width=-1.0, nt=2, nx=5)
    with pytest.raises(ValueError):
        Grid(t_max=1.0, x_half_width=1.0, nt=0, nx=5)
    with pytest.raises(ValueError):
        Grid(t_max=1.0, x_half_width=1.0, nt=2, nx=6)  # even


def test_grid_refined_keeps_extents():
    g = Grid(t_max=1.0, x_half_width=2.0, nt=8, nx=33)
    r = g.refined(factor_t=2, factor_x=4)
    assert r.t_max == g.t_max and r.x_half_width == g.x_half_width
    assert r.dt == pytest.approx(g.dt / 2)
    assert r.dx == pytest.approx(g.dx / 4)
    assert r.nx % 2 == 1


def test_weight_mass_is_one():
    for h in (0.3, 0.42):
        w = Weight(Hurst(h))
        assert w.mass() == pytest.approx(1.0, rel=1e-14)
        val, _ = integrate.quad(w, -np.inf, np.inf)
        assert val == pytest.approx(1.0, rel=1e-8)


def test_weight_default_exponent_and_normalizer():
    hp = Hurst(0.3)
    w = Weight(hp)
    assert w.exponent == pytest.approx(0.7)
    assert w.normalization == pytest.approx(hp.weight_const, rel=1e-14)


def test_weight_rejects_nonintegrable_exponent():
    with pytest.raises(ValueError):
        Weight(Hurst(0.3), exponent=0.5)


def test_weight_shifted_ratio_matches_direct():
    w = Weight(Hurst(0.35), exponent=0.8)
    x = np.linspace(-5, 5, 11)
    z = 2.3
    assert np.allclose(w.shifted_ratio(x, z), w(z - x) / w(z), rtol=1e-13)
