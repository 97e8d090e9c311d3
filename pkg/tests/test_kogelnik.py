import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamholo import kogelnik as kg
from beamholo.errors import (
    GrazingDiffractionError,
    InvalidAngleError,
    InvalidDirectionError,
    NumericalInconsistencyError,
    OffShellError,
)

LAM, N0, N1, D = 532e-9, 1.5, 0.04, 30e-6
Z = np.array([0.0, 0.0, 1.0])


def unit(theta, phi=0.0):
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def symmetric_grating(theta_deg=25.0):
    t = math.radians(theta_deg)
    return kg.record_grating([math.sin(t), 0, math.cos(t)], [-math.sin(t), 0, math.cos(t)], LAM, N0, N1, D, Z)


def closed_form(nu, xi):
    s = math.sqrt(nu * nu + xi * xi)
    return (nu * math.sin(s) / s) ** 2 if s else nu * nu


# -- record_grating -------------------------------------------------------


def test_coincident_beams_give_degenerate_grating():
    g = kg.record_grating(Z, Z, LAM, N0, N1, D, Z)
    assert np.all(g.k == 0)
    assert g.degenerate


def test_symmetric_transmission_grating_vector():
    g = symmetric_grating(25.0)
    beta = 2 * math.pi * N0 / LAM
    # vector-arithmetic oracle
    expected = (-2 * beta * math.sin(math.radians(25)), 0.0, 0.0)
    assert g.k == pytest.approx(expected, abs=1e-9 * beta)
    assert abs(g.k @ Z) <= 1e-9 * beta
    assert not g.degenerate


def test_mirror_about_xz_flips_only_k_y():
    a = unit(0.3, 0.4)
    b = unit(0.5, -1.1)
    mirror = np.array([1.0, -1.0, 1.0])
    g1 = kg.record_grating(a, b, LAM, N0, N1, D, Z)
    g2 = kg.record_grating(a * mirror, b * mirror, LAM, N0, N1, D, Z)
    np.testing.assert_allclose(g2.k, g1.k * mirror, rtol=0, atol=1e-9)


def test_wavenumber_closure_on_record():
    g = symmetric_grating(40)
    assert np.linalg.norm(g.n_r) == pytest.approx(g.beta, rel=1e-9)
    assert np.linalg.norm(g.n_s) == pytest.approx(g.beta, rel=1e-9)
    np.testing.assert_array_equal(g.n_s, g.n_r + g.k)


def test_non_unit_direction_rejected():
    with pytest.raises(InvalidDirectionError):
        kg.record_grating([0, 0, 1.01], Z, LAM, N0, N1, D, Z)


# -- kvcm_replay ----------------------------------------------------------


def test_bragg_matched_replay_is_fixed_point():
    g = symmetric_grating(25)
    r = kg.kvcm_replay(g, g.n_r / g.beta)
    assert np.linalg.norm(r.n_out - g.n_s) <= 1e-12 * g.beta
    assert np.linalg.norm(r.delta_q) == 0.0
    assert r.xi == 0.0


def test_one_degree_off_bragg_matches_quadratic_oracle():
    g = symmetric_grating(25)
    t = math.radians(26.0)
    d_in = np.array([math.sin(t), 0, math.cos(t)])
    r = kg.kvcm_replay(g, d_in)
    # independent oracle: textbook quadratic formula, pick smaller |s|
    p = g.beta * d_in + g.k
    roots = np.roots([1.0, 2 * p @ Z, p @ p - g.beta**2])
    s = roots[np.argmin(np.abs(roots))].real
    assert r.delta_q[2] == pytest.approx(s, rel=1e-9)
    assert abs(np.linalg.norm(r.n_out) - g.beta) <= 1e-12 * g.beta
    assert np.linalg.norm(np.cross(r.delta_q, Z)) <= 1e-9 * np.linalg.norm(r.delta_q)


def test_zero_grating_replays_unchanged():
    g = kg.record_grating(Z, Z, LAM, N0, N1, D, Z)
    d_in = unit(0.2, 0.7)
    r = kg.kvcm_replay(g, d_in)
    np.testing.assert_allclose(r.n_out, g.beta * d_in, rtol=0, atol=1e-12 * g.beta)
    assert np.linalg.norm(r.delta_q) == 0.0


def test_off_shell_replay_raises():
    # grating much longer than 2*beta cannot be closed
    g = kg.record_grating(unit(math.radians(80)), unit(math.radians(-80)), LAM, N0, N1, D, Z)
    with pytest.raises((OffShellError, GrazingDiffractionError)):
        kg.kvcm_replay(g, unit(math.radians(-80)))


def test_grazing_output_raises():
    # reflection-type geometry: output heads back against the surface normal
    g = kg.record_grating(Z, -Z, LAM, N0, N1, D, Z)
    with pytest.raises(GrazingDiffractionError):
        kg.kvcm_replay(g, Z)


@settings(max_examples=200, deadline=None)
@given(
    tr=st.floats(0, 1.2),
    ts=st.floats(0, 1.2),
    ti=st.floats(0, 1.2),
    phi=st.floats(-math.pi, math.pi),
)
def test_closure_and_bounds_property(tr, ts, ti, phi):
    g = kg.record_grating(unit(tr), unit(-ts), LAM, N0, N1, D, Z)
    d_in = unit(ti, phi)
    try:
        r = kg.replay(g, d_in)
    except (OffShellError, GrazingDiffractionError):
        return
    assert abs(np.linalg.norm(r.n_out) - g.beta) <= 1e-9 * g.beta
    assert 0.0 <= r.eta <= 1.0


# -- diffraction efficiency -------------------------------------------------


def test_bragg_nu_half_pi_is_unity():
    assert kg.eta_from_parameters(math.pi / 2, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_default_material_normal_incidence():
    g = kg.record_grating(Z, Z, LAM, N0, N1, D, Z)
    eta = kg.diffraction_efficiency(g, kg.kvcm_replay(g, Z))
    oracle = math.sin(math.pi * 0.04 * 30e-6 / 532e-9) ** 2
    assert eta == pytest.approx(oracle, abs=1e-12)
    assert eta == pytest.approx(0.518, abs=1e-3)


def test_off_bragg_closed_form():
    eta = kg.eta_from_parameters(math.pi / 2, math.pi)
    assert eta == pytest.approx(closed_form(math.pi / 2, math.pi), rel=1e-12)
    assert eta == pytest.approx(0.0264, abs=2e-4)  # exact value 0.026263


def test_efficiency_inconsistency_detected():
    g = symmetric_grating(25)
    r = kg.kvcm_replay(g, g.n_r / g.beta)
    bad = kg.DiffractionResult(r.n_out, r.delta_q, r.nu, float("nan"), r.c_R, r.c_S)
    with pytest.raises(NumericalInconsistencyError):
        kg.diffraction_efficiency(g, bad)


def test_sinc_series_branch_is_continuous():
    x = np.array([0.0, 5e-7, 1e-6, 2e-6])
    np.testing.assert_allclose(kg.sinc(x), [1.0] + [math.sin(v) / v for v in x[1:]], rtol=1e-15)


@pytest.mark.parametrize("nu", [0.3, 1.2, math.pi / 2, 1.5 * math.pi, 2.5 * math.pi])
def test_off_bragg_decay_near_peak(nu):
    e0 = kg.eta_from_parameters(nu, 0.0)
    for delta in (1e-3, 1e-2):
        assert kg.eta_from_parameters(nu, delta) <= e0 + 1e-15
        assert kg.eta_from_parameters(nu, -delta) <= e0 + 1e-15


# -- special case -------------------------------------------------------------


def test_special_case_half_wave():
    assert kg.efficiency_special_case(0.0, 1e-6, 0.05, 10e-6) == pytest.approx(1.0, abs=1e-15)


def test_special_case_matches_full_formula():
    for theta_deg in (0.0, 10.0, 25.5, 40.0):
        g = symmetric_grating(theta_deg) if theta_deg else kg.record_grating(Z, Z, LAM, N0, N1, D, Z)
        eta = kg.diffraction_efficiency(g, kg.kvcm_replay(g, g.n_r / g.beta))
        assert eta == pytest.approx(kg.efficiency_special_case(math.radians(theta_deg), LAM, N1, D), abs=1e-9)


def test_special_case_full_over_coupling():
    theta = math.acos(N1 * D / LAM / 3.0)  # nu = 3*pi
    assert kg.efficiency_special_case(theta, LAM, N1, D) == pytest.approx(0.0, abs=1e-20)


def test_special_case_rejects_grazing():
    with pytest.raises(InvalidAngleError):
        kg.efficiency_special_case(2.0, LAM, N1, D)


# -- efficiency map -----------------------------------------------------------


def test_map_origin_and_symmetry():
    m = kg.efficiency_map(0, 70, 0.5)
    assert m.shape == (141, 141)
    assert m[0, 0] == pytest.approx(math.sin(math.pi * 0.04 * 30e-6 / 532e-9) ** 2, abs=1e-12)
    assert np.max(np.abs(m - m.T)) <= 1e-12


def test_map_peak_oracle():
    m = kg.efficiency_map(0, 70, 0.5)
    # grid-scan oracle: symmetric pairs obey the special case, nu = 5*pi/2
    theta = np.arange(141) * 0.5
    diag = np.sin(np.pi * N1 * D / (LAM * np.cos(np.radians(theta)))) ** 2
    np.testing.assert_allclose(np.diag(m), diag, atol=1e-9)
    k = int(np.argmax(diag[40:60])) + 40
    assert abs(theta[k] - 25.5) <= 1.0
    assert m.max() >= 0.9999
    assert m[51, 51] >= 0.999


def test_map_rejects_ragged_step():
    with pytest.raises(Exception):
        kg.efficiency_map(0, 70, 0.3)


def test_air_to_medium_angle():
    assert kg.air_to_medium_angle(math.radians(35), 1.5) == pytest.approx(math.asin(math.sin(math.radians(35)) / 1.5))


def test_off_bragg_scan_peaks_at_reference():
    g = symmetric_grating(25.5)
    angles = np.radians(np.linspace(20, 31, 111))
    dirs = np.stack([np.sin(angles), 0 * angles, np.cos(angles)], axis=-1)
    eta = kg.off_bragg_scan(g, dirs)
    assert abs(np.degrees(angles[np.argmax(eta)]) - 25.5) <= 0.1
