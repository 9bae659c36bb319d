"""Kernel layer: differences, the oscillatory moment, energies, admissibility.

Golden values come from tests/oracles/kernel_oracle.py (mpmath, 30+ digits;
the energy amplitudes and the double energy at the origin each cross-checked
there by two independent routes before freezing).  The check sweeps run once
per module and the detail assertions pick at their diagnostics.
"""

import json
import math

import numpy as np
import pytest
from scipy import integrate, special

from roughheat import Hurst
from roughheat.kernel import (
    admissibility_integral,
    box_profile_energy,
    check_oscillatory_decay,
    check_weight_admissibility,
    check_weighted_smoothing,
    cosine_moment,
    difference,
    difference_energy,
    double_difference,
    heat_kernel,
    profile_difference,
    profile_double_difference,
    profile_energy,
    run_all_checks,
    smoothing_average,
    total_box_energy,
    total_difference_energy,
)

H03 = Hurst(0.3)


# ----------------------------
# Kernel and differences
# ----------------------------

def test_heat_kernel_quarter_time_slice():
    # G_{1/4}(x) = exp(-x^2)/sqrt(pi)
    assert heat_kernel(0.25, 0.0) == pytest.approx(
        1.0 / math.sqrt(math.pi), rel=1e-15
    )


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        heat_kernel(0.0, 1.0)
    with pytest.raises(ValueError):
        heat_kernel(-1.0, 1.0)


@pytest.mark.parametrize("t", [0.01, 1.0, 100.0])
def test_heat_kernel_unit_mass(t):
    span = 14.0 * math.sqrt(t)  # leaves erfc(7) ~ 4e-23 outside
    mass, _ = integrate.quad(
        lambda x: heat_kernel(t, x), -span, span, epsabs=1e-13, limit=200
    )
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_heat_kernel_semigroup():
    s, t, x = 0.3, 0.7, 1.5
    conv, _ = integrate.quad(
        lambda y: heat_kernel(s, x - y) * heat_kernel(t, y),
        -20.0,
        20.0,
        epsabs=1e-13,
        limit=200,
    )
    assert conv == pytest.approx(heat_kernel(s + t, x), abs=1e-8)


def test_double_difference_decomposition():
    t, y, h = 0.7, 0.3, 0.5
    x = np.linspace(-2.0, 2.0, 9)
    lhs = double_difference(t, x, y, h)
    rhs = difference(t, x + y, h) - difference(t, x, h)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-17)


def test_double_difference_symmetric_in_shift_and_step():
    x = np.linspace(-2.0, 2.0, 9)
    a = double_difference(0.7, x, 0.3, 0.5)
    b = double_difference(0.7, x, 0.5, 0.3)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-18)


def test_double_difference_vanishing_legs():
    # either increment set to zero collapses the box exactly
    assert double_difference(0.7, 1.1, 0.3, 0.0) == 0.0
    assert double_difference(0.7, 1.1, 0.0, 0.5) == 0.0


def test_profile_is_quarter_time_rescaling():
    x = np.linspace(-3.0, 3.0, 13)
    root_pi = math.sqrt(math.pi)
    assert np.allclose(
        profile_difference(x, 0.7),
        root_pi * difference(0.25, x, 0.7),
        rtol=1e-14,
        atol=1e-18,
    )
    assert np.allclose(
        profile_double_difference(x, 0.4, 0.7),
        root_pi * double_difference(0.25, x, 0.4, 0.7),
        rtol=1e-13,
        atol=1e-17,
    )


# ----------------------------
# Oscillatory moment
# ----------------------------

# int_0^inf exp(-eta^2) eta^0.4 cos(x eta) d eta, mpmath oracle
COSINE_MOMENT_04 = {
    0.0: 0.64902766632377889,
    1.0: 0.45133443682643163,
    16.0: -0.010897798064001748,
    256.0: -0.00022169595711266024,
}


@pytest.mark.parametrize("x,want", sorted(COSINE_MOMENT_04.items()))
def test_cosine_moment_golden(x, want):
    assert cosine_moment(x, 0.4) == pytest.approx(want, rel=1e-10)


def test_cosine_moment_linear_order():
    # int_0^inf exp(-eta^2) eta d eta = 1/2
    assert cosine_moment(0.0, 1.0) == pytest.approx(0.5, rel=1e-13)


def test_cosine_moment_gaussian_transform():
    # order 0 is the plain cosine transform, sqrt(pi)/2 * exp(-x^2/4)
    want = 0.5 * math.sqrt(math.pi) * math.exp(-1.0)
    assert cosine_moment(2.0, 0.0) == pytest.approx(want, rel=1e-10)


def test_cosine_moment_rejects_low_order():
    with pytest.raises(ValueError):
        cosine_moment(1.0, -1.0)


# ----------------------------
# Weighted smoothing
# ----------------------------

def test_smoothing_average_golden():
    # exponent 0.7 = 1 - H at H = 0.3
    assert smoothing_average(1.0, 8.0, 0.7) == pytest.approx(
        1.0572839212111317, rel=1e-12
    )
    assert smoothing_average(1.0, 2.0, 0.7) == pytest.approx(
        1.2702225345226787, rel=1e-12
    )


def test_smoothing_average_far_excess():
    # short time, far position: the excess over 1 is tiny but resolved
    excess = smoothing_average(0.01, 1000.0, 0.7) - 1.0
    assert excess == pytest.approx(3.35999213e-8, rel=1e-6)


def test_smoothing_average_flat_weight():
    for t, z in [(1e-3, 0.0), (0.1, 4.0), (1.0, 1024.0)]:
        assert smoothing_average(t, z, 0.0) == pytest.approx(1.0, rel=1e-12)


def test_smoothing_average_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        smoothing_average(0.0, 1.0, 0.7)


# ----------------------------
# Energies, homogeneous weights
# ----------------------------

def test_total_difference_energy_golden():
    assert total_difference_energy(1.0, 0.2) == pytest.approx(
        1.5321481178172944, rel=1e-12
    )
    assert total_difference_energy(1.0, 0.25) == pytest.approx(
        1.1627366340382372, rel=1e-12
    )


def test_total_difference_energy_homogeneity():
    # quartering t multiplies the energy by 4^(1/2 + order)
    ratio = total_difference_energy(0.25, 0.2) / total_difference_energy(1.0, 0.2)
    assert ratio == pytest.approx(4.0**0.7, rel=1e-12)


def test_total_difference_energy_closed_amplitude():
    order = 0.2
    want = (
        2.0
        * 8.0**-order
        * special.gamma(1.0 - order)
        / (order * math.sqrt(8.0 * math.pi))
    )
    assert total_difference_energy(1.0, order) == pytest.approx(want, rel=1e-12)


def test_total_difference_energy_validates():
    with pytest.raises(ValueError):
        total_difference_energy(0.0, 0.2)
    with pytest.raises(ValueError):
        total_difference_energy(1.0, 0.0)
    with pytest.raises(ValueError):
        total_difference_energy(1.0, 1.0)


def test_total_box_energy_golden():
    assert total_box_energy(1.0, 0.2, 0.2) == pytest.approx(
        13.229297820779344, rel=1e-7
    )
    # the closed amplitude is symmetric in the two orders; both grids
    # must land on it even though they differ
    want = 14.09232732471367
    assert total_box_energy(1.0, 0.15, 0.25) == pytest.approx(want, rel=1e-7)
    assert total_box_energy(1.0, 0.25, 0.15) == pytest.approx(want, rel=1e-7)


def test_total_box_energy_validates():
    with pytest.raises(ValueError):
        total_box_energy(1.0, 0.2, 1.2)
    with pytest.raises(ValueError):
        total_box_energy(-1.0, 0.2, 0.2)


# ----------------------------
# Energies, fractional weight
# ----------------------------

def test_profile_energy_golden():
    assert profile_energy(0.0, H03) == pytest.approx(
        4.9555533522783138, rel=1e-12
    )
    assert profile_energy(1.0, H03) == pytest.approx(
        1.226609605122551, rel=1e-12
    )
    assert profile_energy(8.0, H03) == pytest.approx(
        0.068646283153502151, rel=1e-12
    )


def test_difference_energy_golden():
    assert difference_energy(0.25, 1.0, H03) == pytest.approx(
        0.39044196379850364, rel=1e-12
    )
    assert difference_energy(1.0, 1.0, H03) == pytest.approx(
        0.19197358156384277, rel=1e-12
    )


def test_difference_energy_even_in_x():
    assert difference_energy(0.5, -3.0, H03) == difference_energy(0.5, 3.0, H03)


def test_difference_energy_matches_profile_rescaling():
    # the field grid and the profile grid are independent code paths
    t, x = 0.0625, 2.0
    H = H03.h
    want = (
        2.0 ** (2.0 * H - 3.0)
        / math.pi
        * t ** (H - 1.5)
        * profile_energy(x / (2.0 * math.sqrt(t)), H03)
    )
    assert difference_energy(t, x, H03) == pytest.approx(want, rel=1e-10)


def test_difference_energy_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        difference_energy(0.0, 1.0, H03)


def test_box_profile_energy_golden():
    assert box_profile_energy(0.0, H03) == pytest.approx(
        31.4237773966388, rel=2e-7
    )
    assert box_profile_energy(1.0, H03) == pytest.approx(
        12.985757757721413, rel=2e-7
    )
    assert box_profile_energy(8.0, H03) == pytest.approx(
        1.1000861783194005, rel=2e-7
    )


# ----------------------------
# Admissibility integral
# ----------------------------

# (t, z, exponent) -> value, mpmath oracle at H = 0.3
ADMISSIBILITY = [
    (1.0, 10.0, 0.7, 9.1781690872859781),
    (1.0, 100.0, 0.7, 11.646799172629616),
    (1.0, 1000.0, 0.7, 12.623082241032889),
    (1.0, 10000.0, 0.7, 13.011647869251597),
    (1.0, 10.0, 0.9, 13.354246182485256),
    (1.0, 100.0, 0.9, 29.082831577651246),
    (1.0, 1000.0, 0.9, 64.860051419032729),
    (1.0, 10000.0, 0.9, 153.2883685344297),
    (1.0e-8, 1000.0, 0.7, 6.8802930321051941),
]


@pytest.mark.parametrize("t,z,a,want", ADMISSIBILITY)
def test_admissibility_golden(t, z, a, want):
    assert admissibility_integral(t, z, a, H03) == pytest.approx(want, rel=1e-8)


def test_admissibility_short_time_plateau():
    # as t -> 0 with t z^2 small the ratio factor drops out and the
    # integral sits near 2(2-2H)/(1-2H) = 7; at t z^2 = 0.01 the
    # approach is within two percent
    plateau = 2.0 * (2.0 - 2.0 * H03.h) / (1.0 - 2.0 * H03.h)
    got = admissibility_integral(1.0e-8, 1000.0, 0.7, H03)
    assert abs(got / plateau - 1.0) <= 0.05


def test_admissibility_even_in_z():
    assert admissibility_integral(1.0, -10.0, 0.7, H03) == admissibility_integral(
        1.0, 10.0, 0.7, H03
    )


def test_admissibility_validates():
    with pytest.raises(ValueError):
        admissibility_integral(0.0, 1.0, 0.7, H03)
    with pytest.raises(ValueError):
        admissibility_integral(1.0, 1.0, 0.5, H03)


# ----------------------------
# Check sweeps
# ----------------------------

@pytest.fixture(scope="module")
def reports():
    out = {r.name: r for r in run_all_checks(H03)}
    assert len(out) == 8  # names are unique
    return out


def test_all_checks_pass(reports):
    assert set(reports) == {
        "weighted-smoothing-bound",
        "oscillatory-kernel-decay",
        "difference-energy-scaling",
        "box-energy-scaling",
        "difference-energy-decay",
        "box-energy-decay",
        "weight-admissibility",
        "weight-admissibility-sharpness",
    }
    for r in reports.values():
        assert r.passed, r.name


def test_smoothing_check_details(reports):
    d = reports["weighted-smoothing-bound"].details
    assert d["max_value"] == pytest.approx(1.2702225345226787, rel=1e-12)
    assert d["sup_at_largest_t"] is True
    assert d["far_ratio_max"] <= 1.01


def test_oscillatory_check_details(reports):
    d = reports["oscillatory-kernel-decay"].details
    assert d["closed_form_max_rel"] <= 1e-10
    limit = special.gamma(1.4) * math.sin(0.2 * math.pi)
    assert d["limit_const"] == pytest.approx(limit, rel=1e-12)
    # the largest probe has nearly attained the limit
    assert d["scaled"][-1] == pytest.approx(limit, rel=0.01)


def test_scaling_check_details(reports):
    d = reports["difference-energy-scaling"].details
    assert d["slope"] == pytest.approx(-0.7, abs=1e-6)
    assert d["amplitude_rel_err"] <= 1e-10
    d = reports["box-energy-scaling"].details
    assert d["slope"] == pytest.approx(-0.9, abs=1e-6)
    assert d["amplitude_rel_err"] <= 1e-6
    assert d["homogeneity_rel_err"] <= 1e-4


def test_profile_check_details(reports):
    d = reports["difference-energy-decay"].details
    assert d["identity_max_rel"] <= 1e-8
    assert d["envelope_max"] <= 0.5
    # decay ratios approach 1 from below at large x
    assert d["scaled_trend_ratios"][-1] == pytest.approx(1.0, abs=0.01)


def test_box_check_details(reports):
    d = reports["box-energy-decay"].details
    assert d["scaled_spread"] <= 1.5
    assert d["max_value"] == pytest.approx(31.4237773966388, rel=2e-7)


def test_admissibility_check_details(reports):
    d = reports["weight-admissibility"].details
    assert d["plateau_max_rel"] <= 0.03
    assert d["far_ratio"] <= 1.1
    d = reports["weight-admissibility-sharpness"].details
    assert len(d["decade_ratios"]) == 3
    assert d["predicted_ratio"] == pytest.approx(10.0**0.4, rel=1e-12)
    for r in d["decade_ratios"]:
        assert abs(r / d["predicted_ratio"] - 1.0) <= 0.2


def test_flat_weight_smoothing_check():
    r = check_weighted_smoothing(0.0)
    assert r.passed
    assert max(abs(v - 1.0) for v in r.values) <= 1e-12


def test_gaussian_order_decay_check():
    # order 0: closed form underflows past x ~ 50, the comparison must
    # skip the unresolvable probes rather than fail on them
    assert check_oscillatory_decay(0.0).passed


def test_admissibility_check_rejects_low_exponent():
    with pytest.raises(ValueError):
        check_weight_admissibility(H03, exponent=0.4)


# ----------------------------
# Report serialization
# ----------------------------

def test_report_json_record(tmp_path, reports):
    r = reports["oscillatory-kernel-decay"]
    path = tmp_path / "report.json"
    r.write_json(path)
    with open(path) as fh:
        d = json.load(fh)
    assert set(d) == {"lemma", "probes", "values", "assertion", "pass"}
    assert d["lemma"] == r.name
    assert isinstance(d["pass"], bool) and d["pass"]
    assert len(d["probes"]) == len(d["values"]) == len(r.values)
    assert all(len(p) == len(r.probe_names) for p in d["probes"])


def test_report_csv_layout(tmp_path, reports):
    r = reports["weighted-smoothing-bound"]
    path = tmp_path / "report.csv"
    r.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,z,value"
    assert len(lines) == 1 + len(r.values)
    first = lines[1].split(",")
    # %.17g round-trips doubles exactly
    assert float(first[0]) == r.probes[0][0]
    assert float(first[2]) == r.values[0]
