"""Quadrature helpers against closed forms."""

import math

import numpy as np
import pytest

from roughheat.quadrature import (
    edges_geometric,
    edges_linear,
    edges_shrink,
    integrate_panels,
    oscillatory_cosine,
    panel_nodes,
    singular_power_nodes,
)


def test_panels_polynomial_exact():
    # GL with n nodes is exact through degree 2n-1
    val = integrate_panels(lambda x: x**7 - 3 * x**2 + 1, edges_linear(0, 2, 3), n=8)
    exact = 2**8 / 8 - 3 * 8 / 3 + 2
    assert val == pytest.approx(exact, rel=1e-14)


def test_panels_gaussian():
    val = integrate_panels(
        lambda x: np.exp(-(x**2)), edges_linear(-8, 8, 16), n=24
    )
    assert val == pytest.approx(math.sqrt(math.pi), rel=1e-14)


def test_geometric_edges_validation():
    with pytest.raises(ValueError):
        edges_geometric(0.0, 1.0, 4)


def test_shrink_edges_structure():
    e = edges_shrink(1.0, 5)
    assert e[0] == 0.0
    assert np.allclose(e[1:], [1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0])


def test_singular_power_quadrature():
    # int_0^1 h^2 * h^(-1.4) dh = 1/1.6, integrand vanishing quadratically
    h, w = singular_power_nodes(1.0, -1.4, 2, levels=28, n=16)
    val = float(np.dot(h**2, w))
    assert val == pytest.approx(1.0 / 1.6, rel=1e-12)
    # and with a non-polynomial factor: int_0^1 (1-cos h) h^(-1.4) dh
    val2 = float(np.dot(1.0 - np.cos(h), w))
    # reference from series: sum (-1)^(k+1) / (2k)! * 1/(2k - 0.4)
    ref = sum(
        (-1) ** (k + 1) / math.factorial(2 * k) / (2 * k - 0.4)
        for k in range(1, 12)
    )
    assert val2 == pytest.approx(ref, rel=1e-12)


def test_singular_power_rejects_nonintegrable():
    with pytest.raises(ValueError):
        singular_power_nodes(1.0, -2.5, 1)


def test_oscillatory_cosine_gaussian():
    # int_0^inf e^(-eta^2) cos(x eta) d eta = sqrt(pi)/2 e^(-x^2/4)
    for x in (0.0, 3.0, 25.0):
        val = oscillatory_cosine(lambda e: np.exp(-(e**2)), x, cutoff=7.0)
        assert val == pytest.approx(
            math.sqrt(math.pi) / 2 * math.exp(-(x**2) / 4.0), abs=1e-13
        )


def test_oscillatory_cosine_resolves_fast_oscillation():
    # int_0^1 cos(40 eta) = sin(40)/40
    val = oscillatory_cosine(lambda e: np.ones_like(e), 40.0, cutoff=1.0)
    assert val == pytest.approx(math.sin(40.0) / 40.0, rel=1e-12)


def test_panel_nodes_weights_sum():
    nodes, weights = panel_nodes(edges_linear(1.0, 4.0, 5), n=12)
    assert weights.sum() == pytest.approx(3.0, rel=1e-14)
    assert nodes.min() > 1.0 and nodes.max() < 4.0
