import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import argrelmin

from cavmag import (
    ModelError,
    SingularEvaluationError,
    smatrix_direction,
    spectrum_map,
    spectrum_trace,
    symmetry_metric,
    transmission_eq13,
    two_mode_eigenvalues,
    validate_passivity,
)
from cavmag.scattering import to_db, transmission_detuned
from conftest import GHZ, MHZ, two_mode

F_C = 10 * GHZ


def asym_model(delta_m, j=10 * MHZ, gamma_d=10 * MHZ):
    return two_mode(delta_m=delta_m, beta=15 * MHZ, kappa=880 * MHZ, alpha=1.1 * MHZ, j=j, gamma_d=gamma_d)


def test_anti_resonance_depth():
    s = transmission_eq13(asym_model(-160 * MHZ, 0.0, 0.0), F_C)
    assert s == pytest.approx(15 / 895, rel=1e-12)
    assert to_db(s) == pytest.approx(-35.51, abs=0.01)


def test_no_line_coupling_is_transparent():
    model = two_mode(kappa=0.0, j=40 * MHZ)
    f = F_C + np.linspace(-500, 500, 101) * MHZ
    assert np.array_equal(transmission_eq13(model, f), np.ones(101, dtype=complex))
    mp = spectrum_map(model, f, np.linspace(-100, 100, 5) * MHZ)
    assert np.all(mp.s_db == 0.0)


def test_literal_formula():
    model = asym_model(-160 * MHZ)
    f = F_C + np.array([-300.0, -160.0, 0.0, 37.0]) * MHZ
    w, wm = f - F_C, f - (F_C - 160 * MHZ)
    k, b, a, j, g = 880e6, 15e6, 1.1e6, 10e6, 10e6
    ref = 1 + k / (1j * w - (k + b) + (-((1j * j + g) ** 2)) / (1j * wm - a))
    assert np.allclose(transmission_eq13(model, f), ref, rtol=1e-12, atol=0)


def test_mixed_coupling_traces_are_asymmetric():
    x = np.linspace(-500, 500, 20001) * MHZ
    minus = to_db(transmission_eq13(asym_model(-160 * MHZ), F_C + x))
    plus = to_db(transmission_eq13(asym_model(+160 * MHZ), F_C + x))
    assert np.max(np.abs(minus - plus[::-1])) > 1.0
    # only one detuning side carries the ultrasharp interference feature
    sharp_minus = np.max(np.abs(np.diff(minus)))
    sharp_plus = np.max(np.abs(np.diff(plus)))
    assert sharp_minus > 5 * sharp_plus
    trace = spectrum_trace(asym_model(-160 * MHZ), F_C + x)
    assert trace.delta_m == pytest.approx(-160 * MHZ)
    assert np.array_equal(trace.db, minus)


def test_directional_reduces_to_closed_form():
    model = asym_model(-160 * MHZ)
    f = F_C + np.linspace(-1500, 1500, 30001) * MHZ
    a = transmission_eq13(model, f)
    for sigma in (1, -1):
        b = smatrix_direction(model, f, sigma)
        assert np.max(np.abs(a - b) / np.abs(a)) < 1e-12


def test_theta_zero_is_reciprocal():
    model = two_mode(kappa=50 * MHZ, gamma=3 * MHZ, j=10 * MHZ, from_bath=True, delta_m=20 * MHZ)
    f = F_C + np.linspace(-200, 200, 801) * MHZ
    assert np.array_equal(smatrix_direction(model, f, 1), smatrix_direction(model, f, -1))


def test_interference_gives_nonreciprocity():
    g = 10 * MHZ
    model = two_mode(kappa=g, gamma=g, j=g, from_bath=True, theta=math.pi / 2)
    f = F_C + np.linspace(-100, 100, 2001) * MHZ
    fwd = np.abs(smatrix_direction(model, f, 1))
    bwd = np.abs(smatrix_direction(model, f, -1))
    assert np.max(np.abs(fwd - bwd)) > 1e-2
    assert abs(fwd[1000] - bwd[1000]) > 0


def test_sigma_validated():
    with pytest.raises(ModelError):
        smatrix_direction(asym_model(0.0), F_C, 0)


def test_closed_form_rejects_theta():
    with pytest.raises(ModelError):
        transmission_eq13(two_mode(kappa=1e6, j=1e6, theta=0.3), F_C)


def test_singular_point_reported_with_coordinates():
    model = two_mode(beta=0.0, kappa=1.0, alpha=4.0, gamma_d=2.0)
    with pytest.raises(SingularEvaluationError) as info:
        transmission_eq13(model, F_C)
    assert info.value.f == F_C and info.value.delta_m == 0.0
    with pytest.raises(SingularEvaluationError):
        spectrum_map(model, [F_C - 1, F_C, F_C + 1], [0.0, 1.0])
    mp = spectrum_map(model, [F_C - 1, F_C, F_C + 1], [0.0, 1.0], skip_singular=True)
    assert mp.skipped == ((F_C, 0.0),)
    assert np.isnan(mp.s_db[0, 1]) and np.isfinite(mp.s_db[1]).all()


def test_coherent_map_ridges_match_eigenvalue_gap():
    model = two_mode(kappa=0.5 * MHZ, j=40 * MHZ)
    step = 0.5 * MHZ
    f = F_C + np.arange(-100, 100.001, 0.5) * MHZ
    mp = spectrum_map(model, f, np.array([0.0]))
    dips = f[argrelmin(mp.s_db[0])[0]]
    assert len(dips) == 2
    up, lo = two_mode_eigenvalues(model)
    assert abs((dips[1] - dips[0]) - (up.real - lo.real)) <= step
    assert abs((dips[1] - dips[0]) - 79.60 * MHZ) <= step


def test_dissipative_map_single_merged_ridge():
    model = two_mode(kappa=880 * MHZ, gamma=1.818181818 * MHZ, from_bath=True)
    f = F_C + np.arange(-100, 100.001, 1.0) * MHZ
    dms = np.arange(-60, 60.001, 10.0) * MHZ
    mp = spectrum_map(model, f, dms)
    for k, dm in enumerate(dms):
        peak = f[int(np.argmax(mp.s_db[k]))] - F_C
        # one transmission ridge that follows the magnon line through resonance: no gap
        assert abs(peak - dm) <= 1.0 * MHZ


def test_map_requires_grids():
    with pytest.raises(ModelError):
        spectrum_map(asym_model(0.0), [], [0.0])


def test_symmetry_metric_laws():
    x = F_C + np.linspace(-500, 500, 2001) * MHZ
    assert symmetry_metric(asym_model(0.0, 10 * MHZ, 0.0), x, 160 * MHZ) < 1e-12
    assert symmetry_metric(asym_model(0.0, 0.0, 10 * MHZ), x, 160 * MHZ) < 1e-12
    assert symmetry_metric(asym_model(0.0), x, 160 * MHZ) > 1e-3
    with pytest.raises(ModelError):
        symmetry_metric(asym_model(0.0), x[:-1], 160 * MHZ)


mhz = st.floats(0.01, 1000, allow_nan=False)


@given(mhz, mhz, mhz, mhz, st.floats(0, 500), st.floats(0, 1), st.floats(-500, 500))
def test_bounded_when_line_damping_covers_coupling(kappa, beta, alpha, gamma, j, frac, dm):
    # |S| <= 1 holds when Gamma^2 <= beta (alpha + gamma): the closed form drives only the cavity
    gd = frac * math.sqrt(beta * (alpha + gamma))
    x = np.linspace(-3000, 3000, 2001)
    s, bad = transmission_detuned(x, x - dm, kappa, beta, alpha, gamma, j, gd)
    assert not bad.any()
    assert np.all(np.abs(s) <= 1 + 1e-9)


@given(mhz, mhz, mhz, mhz, st.floats(0, 500), st.floats(-500, 500))
def test_bath_model_bounded_and_reciprocal_at_zero_phase(kappa, beta, alpha, gamma, j, dm):
    model = two_mode(kappa=kappa * MHZ, beta=beta * MHZ, alpha=alpha * MHZ, gamma=gamma * MHZ, j=j * MHZ,
                     delta_m=dm * MHZ, from_bath=True)
    assert validate_passivity(model).passive
    f = F_C + np.linspace(-3000, 3000, 2001) * MHZ
    s = smatrix_direction(model, f, 1)
    assert np.all(np.abs(s) <= 1 + 1e-9)


def test_flagged_passive_model_can_exceed_unity_and_is_not_clamped():
    # Gamma^2 = 100 <= (beta+kappa)(alpha+gamma) = 110, but > beta (alpha+gamma) = 10
    model = two_mode(beta=1 * MHZ, kappa=10 * MHZ, alpha=10 * MHZ, gamma_d=10 * MHZ)
    assert validate_passivity(model).passive
    s = transmission_eq13(model, F_C)
    assert s == pytest.approx(-9.0, rel=1e-12)


def test_non_passive_explicit_exceeds_unity():
    model = two_mode(alpha=2 * MHZ, kappa=20 * MHZ, gamma_d=40 * MHZ)
    assert not validate_passivity(model).passive
    s = transmission_eq13(model, F_C + np.linspace(-200, 200, 4001) * MHZ)
    assert np.max(np.abs(s)) > 1.0


@given(mhz, mhz, mhz, mhz, st.floats(0, 100), st.floats(0, 100), st.floats(-200, 200))
def test_far_off_resonance_transparent(kappa, beta, alpha, gamma, j, gd, dm):
    x = np.array([-1e6, 1e6]) * max(kappa, 1.0)
    s, _ = transmission_detuned(x, x - dm, kappa, beta, alpha, gamma, j, gd)
    assert np.all(np.abs(s - 1) < 1e-5)
