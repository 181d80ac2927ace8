import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavmag import (
    AuxiliaryModeParams,
    ElectrodynamicParams,
    ModeParams,
    ModelError,
    TwoToneParams,
    aux_geff,
    aux_geff_map,
    aux_reduction_error,
    classify_effective_coupling,
    electrodynamic_roots,
    n_mode_eigenvalues,
    dynamics_matrix,
    twotone_effective,
    two_mode_eigenvalues,
)
from cavmag.mechanisms import (
    TWO_PI,
    aux_three_mode_model,
    cubic_coefficients,
    mapped_two_mode_model,
    near_resonant_roots,
    twotone_gap,
    uncoupled_roots,
)

MHZ = 1e6
G = 30 * MHZ
CAV = ModeParams("cavity", 10e9, 1 * MHZ)
MAG = ModeParams("magnon", 10e9, 1 * MHZ)


def ed(k_a=0.5, k_f=1e-4, k_l=0.18, dm=0.0, **kw):
    return ElectrodynamicParams(k_a, k_f, k_l, 10e9, 10e9 + dm, alpha=1e-4, beta=1e-3, f_0=5e9, **kw)


def matched_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return min(max(abs(a[0] - b[0]), abs(a[1] - b[1])), max(abs(a[0] - b[1]), abs(a[1] - b[0])))


@pytest.mark.parametrize("params", [dict(k_f=0.0), dict(k_a=0.3, k_l=0.3)])
def test_decoupled_roots_factorize(params):
    p = ed(**params)
    roots = np.sort_complex(electrodynamic_roots(p))
    ref = np.sort_complex(np.array(uncoupled_roots(p)))
    assert np.allclose(roots, ref, rtol=1e-10, atol=0)
    wc = TWO_PI * p.f_c
    mag = TWO_PI * p.f_m / (1 + 1j * p.alpha)
    assert np.isclose(uncoupled_roots(p)[1] * TWO_PI, mag, rtol=1e-14)
    for r in (uncoupled_roots(p)[0], uncoupled_roots(p)[2]):
        w = TWO_PI * r
        assert abs(w * w - wc * wc + 2j * p.beta * wc * w) < 1e-9 * wc * wc


@pytest.mark.parametrize("dm", [0.0, 20 * MHZ, -50 * MHZ])
@pytest.mark.parametrize("ka,kl", [(0.5, 0.18), (0.18, 0.5)])
def test_weak_coupling_matches_mapped_model(ka, kl, dm):
    p = ed(ka, 1e-4, kl, dm)
    g, _ = classify_effective_coupling(p)
    ref = two_mode_eigenvalues(mapped_two_mode_model(p))
    assert matched_error(near_resonant_roots(p), ref) < 0.01 * g


def test_classification():
    assert classify_effective_coupling(ed(0.5, 1e-4, 0.18))[1] == 0.0
    assert classify_effective_coupling(ed(0.18, 1e-4, 0.5))[1] == math.pi
    assert classify_effective_coupling(ed(0.3, 1e-4, 0.3)) == (0.0, 0.0)
    mapped = mapped_two_mode_model(ed(0.18, 1e-4, 0.5))
    assert mapped.coupling(0, 1).j == 0 and mapped.coupling(0, 1).gamma_d > 0


def test_attraction_and_repulsion_signatures():
    rep = near_resonant_roots(ed(0.5, 1e-4, 0.18))
    att = near_resonant_roots(ed(0.18, 1e-4, 0.5))
    assert abs(rep[0].real - rep[1].real) > 50 * MHZ
    assert abs(att[0].real - att[1].real) < 1 * MHZ
    assert abs(att[0].imag - att[1].imag) > 50 * MHZ


def test_f0_from_gyromagnetic_ratio():
    p = ElectrodynamicParams(0.5, 1e-4, 0.18, 10e9, 10e9, gamma_e=1.76e11, m_0=0.175)
    assert p.f_0 == pytest.approx(1.76e11 * 0.175 / TWO_PI)
    with pytest.raises(ModelError):
        ElectrodynamicParams(0.5, 1e-4, 0.18, 10e9, 10e9)
    with pytest.raises(ModelError):
        ElectrodynamicParams(0.5, -1.0, 0.18, 10e9, 10e9, f_0=1e9)


@given(st.floats(0, 1), st.floats(0, 0.1), st.floats(0, 1), st.floats(-500, 500), st.floats(0, 1e-2), st.floats(0, 1e-2))
def test_vieta(k_a, k_f, k_l, dm, alpha, beta):
    p = ElectrodynamicParams(k_a, k_f, k_l, 10e9, 10e9 + dm * MHZ, alpha=alpha, beta=beta, f_0=5e9)
    c = cubic_coefficients(p)
    w = TWO_PI * electrodynamic_roots(p)
    s1 = -c[1] / c[0]
    s2 = c[2] / c[0]
    s3 = -c[3] / c[0]
    assert abs(w.sum() - s1) <= 1e-10 * abs(s1) + 1e-6
    assert abs(w[0] * w[1] + w[0] * w[2] + w[1] * w[2] - s2) <= 1e-10 * abs(s2)
    assert abs(np.prod(w) - s3) <= 1e-10 * abs(s3)


def test_geff_examples():
    assert aux_geff(AuxiliaryModeParams(G, G, 150 * MHZ, 0.0)) == pytest.approx(-6j * MHZ)
    assert aux_geff(AuxiliaryModeParams(G, G, 0.0, 300 * MHZ)) == pytest.approx(3 * MHZ)
    with pytest.raises(ModelError):
        aux_geff(AuxiliaryModeParams(G, G, 0.0, 0.0))


def test_geff_purely_imaginary_on_resonance():
    g = aux_geff(AuxiliaryModeParams(G, G, 150 * MHZ, 0.0))
    assert abs(g.real) < 1e-12 * abs(g)
    assert np.angle(g) == -math.pi / 2


def test_dispersive_window_approximation():
    exact = aux_geff(AuxiliaryModeParams(G, G, 1500 * MHZ, 150 * MHZ))
    approx = -1j * G * G / (1500 * MHZ)
    assert approx == pytest.approx(-0.6j * MHZ)
    # the dissipative part and the modulus agree to 1%; the small coherent
    # part Delta/kappa_aux is what the window approximation drops
    assert abs(exact.imag - approx.imag) < 0.01 * abs(approx)
    assert abs(abs(exact) - abs(approx)) < 0.01 * abs(approx)
    assert abs(exact.real) == pytest.approx(0.1 * abs(exact.imag), rel=1e-12)


def test_three_mode_spectrum_structure():
    p = AuxiliaryModeParams(G, G, 20 * G, 20 * G)
    vals = n_mode_eigenvalues(dynamics_matrix(aux_three_mode_model(p, CAV, MAG)))
    aux = complex(CAV.f - 20 * G, -20 * G)
    near_aux = [v for v in vals if abs(v - aux) < 2 * G]
    near_pair = [v for v in vals if abs(v - CAV.complex_frequency) < 2 * G]
    assert len(near_aux) == 1 and len(near_pair) == 2


def test_reduction_error_regimes():
    assert aux_reduction_error(AuxiliaryModeParams(G, G, 20 * G, 20 * G), CAV, MAG) < 5e-3
    assert aux_reduction_error(AuxiliaryModeParams(0.0, 0.0, 20 * G, 20 * G), CAV, MAG) == 0.0
    with pytest.warns(UserWarning, match="dispersive"):
        big = aux_reduction_error(AuxiliaryModeParams(G, G, 0.1 * G, G), CAV, MAG)
    assert big > 0.3


def test_reduction_error_decreases_along_ray():
    errs = [aux_reduction_error(AuxiliaryModeParams(G, G, s * G, s * G), CAV, MAG) for s in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_geff_map_window_and_corner():
    d = np.linspace(5, 20, 16) * G
    k = np.linspace(5, 20, 16) * G
    gm = aux_geff_map(G, d, k)
    assert abs(gm.values[0, 0]) == pytest.approx(G / math.sqrt(50), rel=1e-12)
    assert abs(gm.values[0, 0]) / MHZ == pytest.approx(4.243, abs=1e-3)
    im = np.abs(gm.values.imag)
    assert np.unravel_index(np.argmax(im), im.shape) == (0, 0)
    with pytest.raises(ModelError):
        aux_geff_map(G, np.linspace(1, 5, 3) * G, k)
    far = aux_geff_map(G, [5 * G], [1e6 * G])
    assert abs(far.values[0, 0]) < 1e-5 * G


@given(st.floats(1e6, 1e9), st.floats(1e6, 1e9), st.floats(0.1, 1e3))
def test_geff_monotone_in_damping(kappa, delta, factor):
    a = aux_geff(AuxiliaryModeParams(G, G, kappa, delta))
    b = aux_geff(AuxiliaryModeParams(G, G, kappa * (1 + factor), delta))
    assert abs(b) < abs(a)


def test_geff_phase_tends_to_zero_for_small_damping():
    args = [np.angle(aux_geff(AuxiliaryModeParams(G, G, k, 300 * MHZ))) for k in (300e6, 30e6, 3e6, 3e3)]
    assert all(abs(b) < abs(a) for a, b in zip(args, args[1:]))
    assert abs(args[-1]) < 1e-4


def test_twotone_examples():
    k = 5 * MHZ
    assert twotone_effective(TwoToneParams(k, 1.0, math.pi)) == 0
    assert twotone_effective(TwoToneParams(k, 1.0, 0.0)) == 2 * k
    assert twotone_effective(TwoToneParams(k, 0.0, 1.234)) == k
    assert twotone_gap(TwoToneParams(k, 1.0, 0.0)) == 4 * k
    with pytest.raises(ModelError):
        TwoToneParams(-1.0, 0.0, 0.0)


@given(st.floats(0, 1e8), st.floats(0, 10), st.floats(-10, 10), st.integers(-3, 3))
def test_twotone_properties(k, delta, phi, n):
    base = twotone_effective(TwoToneParams(k, delta, phi))
    shifted = twotone_effective(TwoToneParams(k, delta, phi + n * TWO_PI))
    assert abs(base - shifted) <= 1e-9 * (1 + delta) * k + 1e-300
    assert abs(base) <= (1 + delta) * k * (1 + 1e-12)
    eps = 1e-9
    near = twotone_effective(TwoToneParams(k, delta + eps, phi))
    assert abs(near - base) <= 2 * eps * k + 1e-9 * k


def test_twotone_bound_equality_only_at_zero_phase():
    k = 1.0
    assert abs(twotone_effective(TwoToneParams(k, 0.7, 0.0))) == pytest.approx(1.7)
    for phi in (0.1, 1.0, 3.0):
        assert abs(twotone_effective(TwoToneParams(k, 0.7, phi))) < 1.7
