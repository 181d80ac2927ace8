"""Transmission of a cavity-magnon pair side-coupled to a travelling wave.

Two forward models are provided:

* :func:`transmission_eq13`, the closed-form two-mode transmission

      S = 1 + kappa / [ i(f - f_c) - (kappa + beta)
                        - (iJ + Gamma)^2 / (i(f - f_m) - (alpha + gamma)) ]

  obtained from the input-output relation ``p_out = p_in - sqrt(kappa) a``
  with the cavity driven by ``+sqrt(kappa) p_in``.

* :func:`smatrix_direction`, a linear-response model in which the magnon is
  also attached to the line (drive and output ``sqrt(gamma) e^{i sigma theta}``)
  and the off-diagonal couplings carry ``e^{+- i sigma theta}``. It is a
  modeling extension: at ``theta = 0`` it is reciprocal and with ``gamma = 0``
  it reduces to the closed form above.

Magnitudes in dB are ``20 log10 |S|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, SingularEvaluationError
from .model import SystemModel, dynamics_matrix, with_detuning

__all__ = [
    "SpectrumTrace",
    "SpectrumMap",
    "to_db",
    "transmission_detuned",
    "transmission_eq13",
    "smatrix_direction",
    "spectrum_trace",
    "spectrum_map",
    "symmetry_metric",
]


@dataclass(frozen=True)
class SpectrumTrace:
    frequencies: np.ndarray
    s: np.ndarray
    sigma: int = 1
    delta_m: float = 0.0
    model: SystemModel | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.frequencies) != len(self.s):
            raise ValueError("frequency and S arrays differ in length")

    @property
    def db(self) -> np.ndarray:
        return to_db(self.s)


@dataclass(frozen=True)
class SpectrumMap:
    """|S| in dB on a (delta_m, f) grid; ``s_db[k, l]`` is at ``delta_m[k], f[l]``."""

    frequencies: np.ndarray
    delta_m: np.ndarray
    s_db: np.ndarray
    skipped: tuple[tuple[float, float], ...] = ()


def to_db(s):
    return 20.0 * np.log10(np.abs(s))


def transmission_detuned(delta_c, delta_cm, kappa, beta, alpha, gamma, j, gamma_d):
    """Closed-form transmission as a function of detunings only.

    ``delta_c = f - f_c`` and ``delta_cm = f - f_m``. Taking detunings rather
    than absolute frequencies keeps full precision for GHz carriers.
    Returns ``(S, singular_mask)``; singular points carry NaN.
    """
    delta_c = np.asarray(delta_c, dtype=float)
    delta_cm = np.asarray(delta_cm, dtype=float)
    coupling = -((1j * j + gamma_d) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_m = 1j * delta_cm - (alpha + gamma)
        if coupling == 0:
            inner = np.zeros(np.broadcast(delta_c, delta_cm).shape, dtype=complex)
            bad_m = np.zeros(inner.shape, dtype=bool)
        else:
            bad_m = d_m == 0
            inner = coupling / d_m
        denom = 1j * delta_c - (kappa + beta) + inner
        bad = bad_m | (denom == 0)
        if kappa == 0:
            s = np.ones(denom.shape, dtype=complex)
            bad = np.zeros(denom.shape, dtype=bool)
        else:
            s = 1.0 + kappa / denom
    s = np.where(bad, np.nan + 0j, s)
    return s, bad


def _two_mode_parts(model: SystemModel):
    if model.n_modes != 2:
        raise ModelError(f"transmission needs a two-mode model, got {model.n_modes} modes")
    if model.drive_port is None:
        raise ModelError("transmission needs a drive port")
    c = model.drive_port
    m = 1 - c
    spec = model.coupling(c, m) or model.coupling(m, c)
    return model.modes[c], model.modes[m], spec


def transmission_eq13(model: SystemModel, f):
    """Closed-form transmission at probe frequency (or array) ``f`` in Hz.

    Only the cavity is probed, so the magnon's share of the coupling channel
    is not fed back through the line. ``|S| <= 1`` is guaranteed when
    ``Gamma^2 <= beta (alpha + gamma)`` with ``beta`` the intrinsic cavity
    damping; the weaker passivity flag ``Gamma^2 <= (beta + kappa)(alpha +
    gamma)`` does not bound ``|S|`` (e.g. beta = 1, kappa = alpha = Gamma =
    10 MHz gives S(f_c) = -9). Values are returned unclamped.
    """
    cav, mag, spec = _two_mode_parts(model)
    j = gamma_d = 0.0
    if spec is not None:
        if spec.theta != 0:
            raise ModelError("the closed-form transmission requires theta = 0")
        j, gamma_d = spec.j, spec.gamma_d
    f = np.asarray(f, dtype=float)
    s, bad = transmission_detuned(
        f - cav.f,
        f - mag.f,
        cav.external_damping,
        cav.intrinsic_damping,
        mag.intrinsic_damping,
        mag.external_damping,
        j,
        gamma_d,
    )
    if bad.any():
        where = np.atleast_1d(f)[np.atleast_1d(bad)][0]
        raise SingularEvaluationError(
            f"transmission is singular at f = {where:.12g} Hz", f=float(where), delta_m=mag.f - cav.f
        )
    return s[()] if s.ndim == 0 else s


def smatrix_direction(model: SystemModel, f, sigma: int = 1):
    """Direction-dependent transmission ``S_sigma = 1 - C [i(M_sigma - f)]^-1 B``."""
    if sigma not in (1, -1):
        raise ModelError(f"sigma must be +1 or -1, got {sigma}")
    cav, mag, spec = _two_mode_parts(model)
    c = model.drive_port
    mi = 1 - c
    theta = spec.theta if spec is not None else 0.0
    # orient the phase on the cavity -> magnon leg regardless of storage order
    if spec is not None and model.coupling(mi, c) is spec:
        theta = -theta
    m = dynamics_matrix(model).astype(complex)
    if spec is not None:
        m[c, mi] = spec.j - 1j * spec.gamma_d * np.exp(1j * sigma * theta)
        m[mi, c] = spec.j - 1j * spec.gamma_d * np.exp(-1j * sigma * theta)
    port = np.zeros(2, dtype=complex)
    port[c] = np.sqrt(cav.external_damping)
    port[mi] = np.sqrt(mag.external_damping) * np.exp(1j * sigma * theta)
    # frequencies relative to the cavity keep precision: i(M - f) = i((M - f_c) - (f - f_c))
    m_rel = m - cav.f * np.eye(2)
    f = np.asarray(f, dtype=float)
    x = np.atleast_1d(f) - cav.f
    a00 = 1j * (m_rel[0, 0] - x)
    a11 = 1j * (m_rel[1, 1] - x)
    a01 = 1j * m_rel[0, 1]
    a10 = 1j * m_rel[1, 0]
    det = a00 * a11 - a01 * a10
    if np.any(det == 0):
        fk = float(np.atleast_1d(f)[np.nonzero(det == 0)[0][0]])
        raise SingularEvaluationError(f"response matrix singular at f = {fk:.12g} Hz", f=fk, delta_m=mag.f - cav.f)
    # port^T A^-1 port with the closed-form 2x2 inverse
    p0, p1 = port
    quad = (p0 * (a11 * p0 - a01 * p1) + p1 * (a00 * p1 - a10 * p0)) / det
    out = 1.0 - quad
    return out[0] if f.ndim == 0 else out.reshape(f.shape)


def spectrum_trace(model: SystemModel, f, sigma: int = 1, directional: bool = False) -> SpectrumTrace:
    f = np.asarray(f, dtype=float)
    s = smatrix_direction(model, f, sigma) if directional else transmission_eq13(model, f)
    dm = float(model.modes[1 - model.drive_port].f - model.drive_mode.f)
    return SpectrumTrace(f, np.atleast_1d(s), sigma, dm, model)


def spectrum_map(model: SystemModel, f_grid, delta_m_grid, skip_singular: bool = False) -> SpectrumMap:
    """|S| in dB over probe frequency and magnon detuning.

    Singular points raise :class:`SingularEvaluationError` (with the offending
    ``f`` and ``delta_m`` attached) unless ``skip_singular`` is set, in which
    case they are stored as NaN and listed in ``skipped``.
    """
    f_grid = np.asarray(f_grid, dtype=float)
    dm_grid = np.asarray(delta_m_grid, dtype=float)
    if f_grid.size == 0 or dm_grid.size == 0:
        raise ModelError("spectrum_map needs non-empty grids")
    cav, mag, spec = _two_mode_parts(model)
    j, gamma_d = (spec.j, spec.gamma_d) if spec is not None else (0.0, 0.0)
    if spec is not None and spec.theta != 0:
        raise ModelError("spectrum_map uses the closed-form transmission and requires theta = 0")
    delta_c = f_grid - cav.f
    # f - f_m = delta_c - delta_m
    s, bad = transmission_detuned(
        delta_c[None, :],
        delta_c[None, :] - dm_grid[:, None],
        cav.external_damping,
        cav.intrinsic_damping,
        mag.intrinsic_damping,
        mag.external_damping,
        j,
        gamma_d,
    )
    skipped = []
    if bad.any():
        rows, cols = np.nonzero(bad)
        if not skip_singular:
            k, l = rows[0], cols[0]
            raise SingularEvaluationError(
                f"transmission singular at f = {f_grid[l]:.12g} Hz, delta_m = {dm_grid[k]:.12g} Hz",
                f=float(f_grid[l]),
                delta_m=float(dm_grid[k]),
            )
        skipped = [(float(f_grid[l]), float(dm_grid[k])) for k, l in zip(rows, cols)]
    with np.errstate(divide="ignore", invalid="ignore"):
        db = to_db(s)
    return SpectrumMap(f_grid, dm_grid, db, tuple(skipped))


def symmetry_metric(model: SystemModel, f_grid, delta_m: float, db: bool = True) -> float:
    """Largest mirror mismatch ``| |S(f_c + x; +delta_m)| - |S(f_c - x; -delta_m)| |``.

    Measured in dB by default (linear magnitude with ``db=False``). The grid
    must be symmetric about ``f_c``; it is snapped to exact antisymmetry
    before evaluation so the metric is not polluted by carrier rounding.
    """
    cav, mag, spec = _two_mode_parts(model)
    j, gamma_d = (spec.j, spec.gamma_d) if spec is not None else (0.0, 0.0)
    x = np.sort(np.asarray(f_grid, dtype=float) - cav.f)
    if x.size == 0:
        raise ModelError("empty frequency grid")
    span = max(np.abs(x).max(), 1.0)
    if not np.allclose(x, -x[::-1], rtol=0, atol=1e-9 * span):
        raise ModelError("frequency grid is not symmetric about the cavity frequency")
    x = 0.5 * (x - x[::-1])
    rates = (cav.external_damping, cav.intrinsic_damping, mag.intrinsic_damping, mag.external_damping, j, gamma_d)
    s_plus, bad_p = transmission_detuned(x, x - delta_m, *rates)
    s_minus, bad_m = transmission_detuned(-x, -x + delta_m, *rates)
    if bad_p.any() or bad_m.any():
        raise SingularEvaluationError("transmission singular on the symmetry grid", delta_m=delta_m)
    if db:
        a, b = to_db(s_plus), to_db(s_minus)
    else:
        a, b = np.abs(s_plus), np.abs(s_minus)
    return float(np.max(np.abs(a - b)))
