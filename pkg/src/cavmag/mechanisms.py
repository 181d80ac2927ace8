"""Microscopic and alternative routes to an effective magnon-photon coupling.

* Electrodynamic (cavity Lenz) picture: the 2x2 current/magnetization system

      [ w^2 - w_c^2 + 2i beta w_c w      i w^2 K_F          ] [j]
      [ -i w_0 (K_A - K_L)               w - w_m + i alpha w ] [m] = 0

  whose determinant is a cubic in w. Its alpha, beta are dimensionless
  (they multiply w), unlike the Hz rates elsewhere in the package, and the
  cubic is not homogeneous in w, so it is solved in rad/s and converted.
* A damped auxiliary mode that mediates ``g_eff = -i g_ac g_bc / (kappa_aux - i Delta)``.
  ``Delta`` is the principal-mode frequency minus the auxiliary frequency.
* The two-tone drive, which rescales a coherent coupling to ``(1 + delta e^{i phi}) K``.
  A closed two-tone gap mimics level attraction without any dissipative
  coupling; outputs should not be read as evidence for one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .eigen import eigenvalues_2x2
from .errors import ModelError
from .model import ModeParams, SystemModel, CouplingSpec, build_system, dynamics_matrix

__all__ = [
    "ElectrodynamicParams",
    "AuxiliaryModeParams",
    "TwoToneParams",
    "GeffMap",
    "cubic_coefficients",
    "electrodynamic_roots",
    "near_resonant_roots",
    "uncoupled_roots",
    "classify_effective_coupling",
    "mapped_two_mode_model",
    "aux_geff",
    "aux_dispersive_parameter",
    "aux_three_mode_model",
    "aux_reduced_matrix",
    "aux_reduction_error",
    "aux_geff_map",
    "twotone_effective",
    "twotone_gap",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ElectrodynamicParams:
    """Parameters of the current/magnetization model.

    ``f_0 = gamma_e M_0 / 2 pi`` may be given directly or through ``gamma_e``
    (rad s^-1 T^-1) and ``M_0`` (T). ``alpha`` and ``beta`` are dimensionless
    damping factors; near resonance they correspond to Hz rates of roughly
    ``alpha * f_m`` and ``beta * f_c``.
    """

    k_a: float
    k_f: float
    k_l: float
    f_c: float
    f_m: float
    alpha: float = 0.0
    beta: float = 0.0
    f_0: float | None = None
    gamma_e: float | None = None
    m_0: float | None = None

    def __post_init__(self):
        if self.f_0 is None:
            if self.gamma_e is None or self.m_0 is None:
                raise ModelError("give f_0 or both gamma_e and M_0")
            object.__setattr__(self, "f_0", self.gamma_e * self.m_0 / TWO_PI)
        if self.k_f < 0:
            raise ModelError("K_F must be >= 0")
        if not self.f_0 > 0:
            raise ModelError("f_0 must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ModelError("alpha and beta must be >= 0")
        if not (self.f_c > 0 and self.f_m > 0):
            raise ModelError("f_c and f_m must be > 0")


def cubic_coefficients(p: ElectrodynamicParams) -> np.ndarray:
    """Coefficients (highest power first) of the determinant, in rad/s units."""
    wc, wm, w0 = TWO_PI * p.f_c, TWO_PI * p.f_m, TWO_PI * p.f_0
    lead = 1.0 + 1j * p.alpha
    k = p.k_f * w0 * (p.k_a - p.k_l)
    # (w^2 + 2i beta wc w - wc^2)(lead w - wm) - k w^2
    return np.array(
        [
            lead,
            2j * p.beta * wc * lead - wm - k,
            -(wc**2) * lead - 2j * p.beta * wc * wm,
            wc**2 * wm,
        ],
        dtype=complex,
    )


def electrodynamic_roots(p: ElectrodynamicParams) -> np.ndarray:
    """The three complex roots in Hz, sorted by real part."""
    coeffs = cubic_coefficients(p)
    if coeffs[0] == 0:
        raise ModelError("degenerate cubic: vanishing leading coefficient")
    # companion matrix of the monic cubic
    monic = coeffs[1:] / coeffs[0]
    companion = np.zeros((3, 3), dtype=complex)
    companion[0, :] = -monic
    companion[1, 0] = companion[2, 1] = 1.0
    roots = np.linalg.eigvals(companion) / TWO_PI
    return roots[np.argsort(roots.real)]


def uncoupled_roots(p: ElectrodynamicParams) -> tuple[complex, complex, complex]:
    """(cavity root near +f_c, magnon root, cavity root near -f_c) in Hz, without coupling."""
    wc, wm = TWO_PI * p.f_c, TWO_PI * p.f_m
    disc = np.sqrt(complex(wc**2 - (p.beta * wc) ** 2))
    cav_pos = -1j * p.beta * wc + disc
    cav_neg = -1j * p.beta * wc - disc
    mag = wm / (1.0 + 1j * p.alpha)
    return cav_pos / TWO_PI, mag / TWO_PI, cav_neg / TWO_PI


def near_resonant_roots(p: ElectrodynamicParams) -> np.ndarray:
    """The two roots assigned to f_c and f_m (minimum total distance)."""
    roots = electrodynamic_roots(p)
    targets = np.array([p.f_c, p.f_m])
    cost = np.abs(targets[:, None] - roots[None, :])
    _, cols = linear_sum_assignment(cost)
    return roots[cols]


def classify_effective_coupling(p: ElectrodynamicParams) -> tuple[float, float]:
    """Net coupling magnitude ``g`` (Hz) and phase ``Phi`` in {0, pi}.

    ``g^2 = w_c w_0 K_F (K_A - K_L) / 2`` (rad/s), from linearizing the cavity
    factor about ``w = w_c``. ``Phi = 0`` (coherent) when the Ampere torque
    dominates, ``Phi = pi`` (dissipative) when the Lenz backaction does.
    """
    wc, w0 = TWO_PI * p.f_c, TWO_PI * p.f_0
    g_sq = wc * w0 * p.k_f * (p.k_a - p.k_l) / 2.0
    g = math.sqrt(abs(g_sq)) / TWO_PI
    if g == 0:
        return 0.0, 0.0
    return g, (0.0 if g_sq > 0 else math.pi)


def mapped_two_mode_model(p: ElectrodynamicParams) -> SystemModel:
    """Effective two-mode model built from the uncoupled roots and the mapped coupling.

    ``Phi = 0`` maps to ``J = g``; ``Phi = pi`` maps to an explicit ``Gamma = g``.
    """
    cav, mag, _ = uncoupled_roots(p)
    g, phi = classify_effective_coupling(p)
    spec = CouplingSpec(j=g) if phi == 0 else CouplingSpec(gamma_d=g)
    modes = [
        ModeParams("cavity", cav.real, -cav.imag),
        ModeParams("magnon", mag.real, -mag.imag),
    ]
    return build_system(modes, [(0, 1, spec)])


@dataclass(frozen=True)
class AuxiliaryModeParams:
    g_ac: float
    g_bc: float
    kappa_aux: float
    delta: float

    def __post_init__(self):
        if self.g_ac < 0 or self.g_bc < 0:
            raise ModelError("auxiliary couplings must be >= 0")
        if self.kappa_aux < 0:
            raise ModelError("kappa_aux must be >= 0")


def aux_geff(p: AuxiliaryModeParams) -> complex:
    denom = complex(p.kappa_aux, -p.delta)
    if denom == 0:
        raise ModelError("g_eff undefined for kappa_aux = 0 and Delta = 0")
    return -1j * p.g_ac * p.g_bc / denom


def aux_dispersive_parameter(p: AuxiliaryModeParams) -> float:
    """``max(g_ac, g_bc) / |kappa_aux - i Delta|``; elimination needs this << 1."""
    return max(p.g_ac, p.g_bc) / abs(complex(p.kappa_aux, -p.delta))


def aux_three_mode_model(p: AuxiliaryModeParams, cavity: ModeParams, magnon: ModeParams) -> SystemModel:
    """Cavity, magnon and an auxiliary mode at ``f_c - Delta`` with damping kappa_aux."""
    aux = ModeParams("auxiliary", cavity.f - p.delta, p.kappa_aux)
    couplings = [(0, 2, CouplingSpec(j=p.g_ac)), (1, 2, CouplingSpec(j=p.g_bc))]
    return build_system([cavity, magnon, aux], couplings)


def aux_reduced_matrix(p: AuxiliaryModeParams, cavity: ModeParams, magnon: ModeParams) -> np.ndarray:
    """Principal 2x2 matrix after eliminating the auxiliary mode to first order.

    Off-diagonals are ``g_eff``; each diagonal also picks up its own
    self-energy ``-i g^2 / (kappa_aux - i Delta)``.
    """
    denom = complex(p.kappa_aux, -p.delta)
    m = np.diag([cavity.complex_frequency, magnon.complex_frequency]).astype(complex)
    m[0, 0] += -1j * p.g_ac**2 / denom
    m[1, 1] += -1j * p.g_bc**2 / denom
    m[0, 1] = m[1, 0] = aux_geff(p)
    return m


def aux_reduction_error(p: AuxiliaryModeParams, cavity: ModeParams, magnon: ModeParams) -> float:
    """Largest principal-eigenvalue mismatch between the full and reduced models.

    Normalized by the auxiliary coupling scale ``max(g_ac, g_bc)``; zero when
    both couplings vanish. Warns when the dispersive parameter is not small.
    """
    g = max(p.g_ac, p.g_bc)
    if aux_dispersive_parameter(p) > 0.3:
        warnings.warn(
            f"auxiliary mode is not dispersive (g/|kappa_aux - i Delta| = {aux_dispersive_parameter(p):.3g}); "
            "the eliminated coupling is outside its validity range",
            stacklevel=2,
        )
    full = aux_three_mode_model(p, cavity, magnon)
    vals, vecs = np.linalg.eig(dynamics_matrix(full))
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    weight = np.abs(vecs[0]) ** 2 + np.abs(vecs[1]) ** 2
    principal = vals[np.argsort(-weight)[:2]]
    reduced = np.array(eigenvalues_2x2(aux_reduced_matrix(p, cavity, magnon)))
    cost = np.abs(principal[:, None] - reduced[None, :])
    rows, cols = linear_sum_assignment(cost)
    if g == 0:
        return float(cost[rows, cols].max())
    return float(cost[rows, cols].max() / g)


@dataclass(frozen=True)
class GeffMap:
    """``values[k, l]`` is g_eff at ``delta[l]``, ``kappa_aux[k]``."""

    g: float
    delta: np.ndarray
    kappa_aux: np.ndarray
    values: np.ndarray


def aux_geff_map(g: float, delta_grid, kappa_grid, window: float = 5.0) -> GeffMap:
    """g_eff with ``g_ac = g_bc = g`` over detuning and auxiliary damping.

    Both axes must stay at least ``window * g`` away from zero (the dispersive,
    low-damping window).
    """
    delta = np.asarray(delta_grid, dtype=float)
    kappa = np.asarray(kappa_grid, dtype=float)
    lim = window * g * (1 - 1e-12)
    if np.any(np.abs(delta) < lim) or np.any(kappa < lim):
        raise ModelError(f"grids must satisfy |Delta|, kappa_aux >= {window} g")
    values = -1j * g * g / (kappa[:, None] - 1j * delta[None, :])
    return GeffMap(g, delta, kappa, values)


@dataclass(frozen=True)
class TwoToneParams:
    k: float
    delta: float
    phi: float

    def __post_init__(self):
        if self.k < 0 or self.delta < 0:
            raise ModelError("K and delta must be >= 0")


def twotone_effective(p: TwoToneParams) -> complex:
    """Two-tone effective coupling ``(1 + delta e^{i phi}) K``.

    Exact zeros at ``delta = 1, phi = pi`` are returned as 0 rather than a
    roundoff residue of ``e^{i pi}``.
    """
    phase = complex(math.cos(p.phi), math.sin(p.phi))
    if math.remainder(p.phi, TWO_PI) == math.pi or math.remainder(p.phi, TWO_PI) == -math.pi:
        phase = -1.0 + 0j
    elif math.remainder(p.phi, TWO_PI) == 0:
        phase = 1.0 + 0j
    return (1.0 + p.delta * phase) * p.k


def twotone_gap(p: TwoToneParams) -> float:
    """Anticrossing gap ``2 |(1 + delta e^{i phi}) K|`` at resonance."""
    return 2.0 * abs(twotone_effective(p))
