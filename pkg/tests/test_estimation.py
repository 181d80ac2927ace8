import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from cavmag.errors import ModelError, NoFeatureError, SingularJacobianError
from cavmag.estimation import (
    PARAM_NAMES,
    SpectrumData,
    fit_spectrum,
    forward_db,
    initial_guess,
    is_stable,
    magnitude_twins,
    synthetic_spectrum,
)

MHZ = 1e6
F_C = 10e9
MIXED = dict(f_c=F_C, f_m=F_C - 160 * MHZ, kappa=880 * MHZ, beta=15 * MHZ, alpha=1.1 * MHZ, gamma=0.0, J=10 * MHZ, Gamma=10 * MHZ)
FREE = ("f_c", "f_m", "kappa", "beta", "alpha", "J", "Gamma")


def grid(n=30001):
    return np.linspace(F_C - 1.5e9, F_C + 1.5e9, n)


def rel_err(fit, truth, names=FREE):
    return max(abs(fit[n] - truth[n]) / max(abs(truth[n]), 1.0) for n in names)


def composite_grid(p):
    # coarse background plus a dense patch on the narrow magnon feature
    span = p["alpha"] + abs(p["J"]) + abs(p["Gamma"])
    coarse = p["f_c"] + np.linspace(-2 * p["kappa"], 2 * p["kappa"], 3001)
    fine = p["f_m"] + np.linspace(-30 * span, 30 * span, 2001)
    return np.unique(np.concatenate([coarse, fine]))


@pytest.fixture(scope="module")
def noiseless_fit():
    data = synthetic_spectrum(MIXED, grid())
    return data, fit_spectrum(data)


# --- initial_guess ---------------------------------------------------------


def test_initial_guess_zero_coupling_recovers_cavity():
    p = dict(MIXED, J=0.0, Gamma=0.0)
    f = grid(3001)
    seed = initial_guess(synthetic_spectrum(p, f))
    step = f[1] - f[0]
    assert abs(seed["f_c"] - F_C) <= step
    assert abs(seed["kappa"] / p["kappa"] - 1) < 0.2
    assert abs(seed["beta"] / p["beta"] - 1) < 0.3


def test_initial_guess_flat_trace_has_no_feature():
    f = grid(200)
    with pytest.raises(NoFeatureError):
        initial_guess(SpectrumData(f, np.zeros_like(f)))


def test_initial_guess_needs_fifty_points():
    f = grid(49)
    with pytest.raises(ModelError):
        initial_guess(synthetic_spectrum(MIXED, f))


def test_initial_guess_reproduces_dip_depth():
    p = dict(MIXED, J=0.0, Gamma=0.0)
    f = grid(3001)
    seed = initial_guess(synthetic_spectrum(p, f))
    depth = forward_db(seed, [seed["f_c"]])[0]
    assert abs(depth - 20 * math.log10(15 / 895)) < 3.0


# --- fit_spectrum examples -------------------------------------------------


def test_noiseless_round_trip(noiseless_fit):
    _, r = noiseless_fit
    assert r.converged
    assert rel_err(r.values, MIXED) < 1e-3


def test_history_non_increasing_and_rates_non_negative(noiseless_fit):
    _, r = noiseless_fit
    assert np.all(np.diff(r.history) <= 0)
    assert r.residual_norm == r.history[-1]
    assert all(r.values[n] >= 0 for n in ("kappa", "beta", "alpha", "gamma"))
    assert set(r.values) == set(PARAM_NAMES)


def test_reseed_from_optimum_keeps_residual(noiseless_fit):
    data, r = noiseless_fit
    again = fit_spectrum(data, seed=r.values)
    assert again.residual_norm <= r.residual_norm * (1 + 1e-6) + 1e-9
    assert rel_err(again.values, r.values) < 1e-6


def test_reseed_invariance_noisy():
    data = synthetic_spectrum(MIXED, grid(), snr_db=40, rng=11)
    r = fit_spectrum(data)
    again = fit_spectrum(data, seed=r.values)
    assert abs(again.residual_norm - r.residual_norm) <= 1e-6 * r.residual_norm


def test_noisy_fit_within_tolerances():
    data = synthetic_spectrum(MIXED, grid(), snr_db=40, rng=5)
    v = fit_spectrum(data).values
    assert abs(v["J"] / MIXED["J"] - 1) < 0.05
    assert abs(v["Gamma"] / MIXED["Gamma"] - 1) < 0.05
    assert abs(v["f_c"] - MIXED["f_c"]) < 0.5 * MHZ
    assert abs(v["f_m"] - MIXED["f_m"]) < 0.5 * MHZ


def test_pure_coherent_gamma_consistent_with_zero():
    truth = dict(MIXED, Gamma=0.0)
    consistent = 0
    for k in range(5):
        r = fit_spectrum(synthetic_spectrum(truth, grid(), snr_db=40, rng=100 + k))
        consistent += abs(r.values["Gamma"]) <= 2 * r.stderr["Gamma"]
    # each trial holds with ~95% probability
    assert consistent >= 4


def test_from_bath_round_trip():
    p = dict(MIXED, gamma=0.2 * MHZ, Gamma=0.0)
    p["Gamma"] = math.sqrt(p["kappa"] * p["gamma"])
    data = synthetic_spectrum(p, grid(), parameterization="from_bath")
    r = fit_spectrum(data, parameterization="from_bath")
    assert r.parameterization == "from_bath"
    assert "gamma" in r.free and "Gamma" not in r.free
    assert rel_err(r.values, p, ("f_c", "f_m", "kappa", "beta", "alpha", "gamma", "J")) < 1e-3


def test_frozen_parameters_stay_at_seed():
    data = synthetic_spectrum(MIXED, grid(6001))
    seed = dict(MIXED, J=8 * MHZ, kappa=900 * MHZ)
    r = fit_spectrum(data, seed=seed, frozen=["kappa", "f_c"])
    assert r.values["kappa"] == seed["kappa"] and r.values["f_c"] == seed["f_c"]
    assert "kappa" not in r.free and r.stderr["kappa"] == 0.0


def test_all_frozen_and_unknown_frozen_rejected():
    data = synthetic_spectrum(MIXED, grid(2001))
    with pytest.raises(ModelError):
        fit_spectrum(data, seed=MIXED, frozen=PARAM_NAMES)
    with pytest.raises(ModelError):
        fit_spectrum(data, seed=MIXED, frozen=["coupling"])


def test_single_dead_parameter_is_singular():
    data = synthetic_spectrum(MIXED, grid(2001))
    seed = dict(MIXED, J=0.0, Gamma=0.0)
    frozen = [n for n in PARAM_NAMES if n != "J"]
    with pytest.raises(SingularJacobianError):
        fit_spectrum(data, seed=seed, frozen=frozen, multistart=0)


def test_unknown_parameterization():
    data = synthetic_spectrum(MIXED, grid(2001))
    with pytest.raises(ModelError):
        fit_spectrum(data, parameterization="polar")


def test_spectrum_data_validation():
    with pytest.raises(ModelError):
        SpectrumData([2.0, 1.0], [0.0, 0.0])
    with pytest.raises(ModelError):
        SpectrumData([1.0, 2.0], [0.0, np.nan])
    with pytest.raises(ModelError):
        SpectrumData([1.0, 2.0], [0.0, 0.0], sigma=[1.0, 0.0])


# --- twins and symmetry ----------------------------------------------------


def test_twins_share_magnitude_and_are_stable():
    f = grid(4001)
    twins = magnitude_twins(MIXED)
    assert twins
    ref = forward_db(MIXED, f)
    for t in twins:
        assert is_stable(t)
        assert np.max(np.abs(forward_db(t, f) - ref)) < 1e-8
        assert all(t[n] >= 0 for n in ("kappa", "beta", "alpha"))


def test_phase_picks_the_true_twin(noiseless_fit):
    _, r = noiseless_fit
    assert rel_err(r.values, MIXED) < 1e-3
    assert all(rel_err(t, MIXED) > 1e-2 for t in r.alternates)


def test_mirror_reflected_data_gives_mirrored_parameters(noiseless_fit):
    data, r = noiseless_fit
    f = data.frequencies
    mirrored = SpectrumData((2 * F_C - f)[::-1], data.magnitudes[::-1], -data.phase[::-1])
    m = fit_spectrum(mirrored).values
    expect = dict(MIXED, f_m=2 * F_C - MIXED["f_m"], Gamma=-MIXED["Gamma"])
    assert rel_err(m, expect) < 1e-3
    assert abs(abs(m["J"]) - abs(r.values["J"])) < 1e-3 * MIXED["J"]
    assert abs(abs(m["Gamma"]) - abs(r.values["Gamma"])) < 1e-3 * MIXED["J"]


# --- properties ------------------------------------------------------------


@st.composite
def physical_params(draw):
    kappa = 10 ** draw(st.floats(math.log10(100e6), math.log10(15e9)))
    beta = draw(st.floats(1, 50)) * MHZ
    alpha = draw(st.floats(0.5, 5)) * MHZ
    j = draw(st.floats(5, 30)) * MHZ
    # passive models only: an active truth has a growing mode
    g = min(draw(st.floats(0, 30)) * MHZ, 0.95 * math.sqrt((kappa + beta) * alpha))
    g *= draw(st.sampled_from([-1, 1]))
    dm = draw(st.sampled_from([-1, 1])) * draw(st.floats(0.1, 0.5)) * kappa
    f_c = 10e9 if kappa < 3e9 else 30e9
    return dict(f_c=f_c, f_m=f_c + dm, kappa=kappa, beta=beta, alpha=alpha, gamma=0.0, J=j, Gamma=g)


@settings(max_examples=25)
@given(physical_params())
# weak far-detuned feature (0.02 dB) on a very broad cavity
@example(dict(f_c=30e9, f_m=25e9, kappa=10e9, beta=1e6, alpha=1e6, gamma=0.0, J=5e6, Gamma=-1e6))
# strong hybridization inside a narrow dip distorts the cavity seed
@example(dict(f_c=10e9, f_m=9.975e9, kappa=100e6, beta=1e6, alpha=3.65625e6, gamma=0.0, J=17e6, Gamma=-16e6))
# merged grid with a near-duplicate point at the feature
@example(dict(f_c=10e9, f_m=10282213791.03715, kappa=2822137910.371489, beta=1e6, alpha=5e5, gamma=0.0, J=20e6, Gamma=0.0))
def test_round_trip_over_physical_box(p):
    r = fit_spectrum(synthetic_spectrum(p, composite_grid(p)))
    assert rel_err(r.values, p, ("kappa", "beta", "alpha", "J", "Gamma")) < 1e-3
    assert abs(r.values["f_c"] - p["f_c"]) < 1e-3 * p["kappa"]
    assert abs(r.values["f_m"] - p["f_m"]) < 1e-3 * p["alpha"] + 1.0


@settings(max_examples=20)
@given(physical_params())
def test_twins_reproduce_magnitude(p):
    f = composite_grid(p)
    ref = forward_db(p, f)
    for t in magnitude_twins(p):
        assert np.max(np.abs(forward_db(t, f) - ref)) < 1e-6
