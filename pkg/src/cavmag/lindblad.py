"""Truncated-Fock master equation for a cavity mode ``a`` and a magnon ``b``.

The generator is

    drho/dt = -i [H, rho] + 2 tau L[o] rho + 2 beta L[a] rho + 2 alpha L[b] rho

with ``H = Delta_c a^+a + Delta_m b^+b + J (a^+ b + a b^+)`` (rotating frame),
the collective jump operator ``o = nu a + u e^{i theta} b`` and the standard
dissipator ``L[o] rho = o rho o^+ - {o^+ o, rho} / 2``. The factor two on each
dissipator makes the first moments decay at the *full* rates used by
:mod:`cavmag.model`, so that

    d<a>/dt = -i Delta_c <a> - (beta + kappa) <a> - (iJ + Gamma e^{i theta}) <b>

with ``kappa = tau nu^2``, ``gamma = tau u^2`` and ``Gamma = tau nu u``.
All rates are converted to angular units (x 2 pi) internally; times are in
seconds. Integration is a fixed-step classical RK4 on the vectorized
Liouvillian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import IntegratorError, ModelError
from .model import SystemModel, dynamics_matrix

__all__ = [
    "JumpOperatorSpec",
    "DensityMatrix",
    "Trajectory",
    "OracleReport",
    "ladder_operators",
    "liouvillian",
    "rate_scale",
    "evolve_master_equation",
    "first_moments",
    "effective_moments",
    "characteristic_period",
    "oracle_report",
    "oracle_compare",
]

TRACE_ERROR = 1e-6
LEAKAGE_ERROR = 1e-6
MAX_STEP_RATE = 0.05
MAX_AMPLITUDE = 0.1


@dataclass(frozen=True)
class JumpOperatorSpec:
    """Collective jump operator ``nu a + u e^{i theta} b`` with bath rate ``tau`` (Hz)."""

    tau: float
    nu: float
    u: float
    theta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.tau) or self.tau < 0:
            raise ModelError(f"bath rate tau must be >= 0, got {self.tau}")

    @classmethod
    def from_rates(cls, kappa: float, gamma: float, theta: float = 0.0) -> JumpOperatorSpec:
        """Jump operator reproducing external rates ``kappa`` and ``gamma``.

        Normalized so that ``nu^2 + u^2 = 1`` and ``tau = kappa + gamma``.
        """
        if kappa < 0 or gamma < 0:
            raise ModelError("external rates must be >= 0")
        tau = kappa + gamma
        if tau == 0:
            return cls(0.0, 1.0, 0.0, theta)
        return cls(tau, math.sqrt(kappa / tau), math.sqrt(gamma / tau), theta)

    @classmethod
    def from_model(cls, model: SystemModel) -> JumpOperatorSpec:
        """Jump operator matching the external dampings and phase of a two-mode model."""
        if model.n_modes != 2:
            raise ModelError("jump operator needs a two-mode model")
        spec = model.coupling(0, 1) or model.coupling(1, 0)
        theta = 0.0
        if spec is not None:
            theta = spec.theta if model.coupling(0, 1) is spec else -spec.theta
        return cls.from_rates(model.modes[0].external_damping, model.modes[1].external_damping, theta)

    @property
    def kappa(self) -> float:
        return self.tau * self.nu**2

    @property
    def gamma(self) -> float:
        return self.tau * self.u**2

    @property
    def cooperative(self) -> float:
        return self.tau * self.nu * self.u


def ladder_operators(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation operators ``a`` (first factor) and ``b`` (second factor)."""
    d = n_max + 1
    lower = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
    eye = np.eye(d)
    return np.kron(lower, eye), np.kron(eye, lower)


@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray
    n_max: int

    def __post_init__(self):
        d = (self.n_max + 1) ** 2
        if self.n_max < 1:
            raise ModelError("Fock cutoff must be >= 1")
        if self.data.shape != (d, d):
            raise ModelError(f"density matrix must be {d}x{d} for cutoff {self.n_max}")

    @classmethod
    def from_ket(cls, ket, n_max: int) -> DensityMatrix:
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()), n_max)

    @classmethod
    def vacuum(cls, n_max: int = 4) -> DensityMatrix:
        ket = np.zeros((n_max + 1) ** 2, dtype=complex)
        ket[0] = 1.0
        return cls.from_ket(ket, n_max)

    @classmethod
    def fock(cls, n_a: int, n_b: int, n_max: int = 4) -> DensityMatrix:
        ket = np.zeros((n_max + 1) ** 2, dtype=complex)
        ket[n_a * (n_max + 1) + n_b] = 1.0
        return cls.from_ket(ket, n_max)

    @classmethod
    def coherent(cls, alpha_a: complex, alpha_b: complex = 0.0, n_max: int = 4) -> DensityMatrix:
        """Product of truncated, renormalized coherent states."""
        n = np.arange(n_max + 1)
        fact = np.sqrt([math.factorial(int(k)) for k in n])

        def single(amp):
            return complex(amp) ** n / fact

        return cls.from_ket(np.kron(single(alpha_a), single(alpha_b)), n_max)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def top_population(self) -> float:
        """Population with either mode in its highest retained Fock level."""
        d = self.n_max + 1
        pops = np.real(np.diag(self.data)).reshape(d, d)
        return float(pops[-1, :].sum() + pops[:, -1].sum() - pops[-1, -1])

    def hermiticity_error(self) -> float:
        return float(np.abs(self.data - self.data.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T)).min())


def first_moments(rho: DensityMatrix) -> tuple[complex, complex]:
    a, b = ladder_operators(rho.n_max)
    return complex(np.trace(a @ rho.data)), complex(np.trace(b @ rho.data))


def _two_mode(model: SystemModel):
    if model.n_modes != 2:
        raise ModelError("master equation is implemented for two modes")
    spec = model.coupling(0, 1) or model.coupling(1, 0)
    return spec.j if spec is not None else 0.0


def liouvillian(model: SystemModel, jump: JumpOperatorSpec, n_max: int, frame: float | None = None):
    """Sparse superoperator (rad/s) acting on row-major ``vec(rho)``.

    Only the coherent part ``J`` of the model coupling and the intrinsic
    dampings enter; the external dampings and the dissipative coupling come
    from ``jump`` alone.
    """
    if frame is None:
        frame = model.modes[0].f
    j = _two_mode(model)
    a, b = ladder_operators(n_max)
    ad, bd = a.conj().T, b.conj().T
    two_pi = 2.0 * math.pi
    h = two_pi * (
        (model.modes[0].f - frame) * (ad @ a) + (model.modes[1].f - frame) * (bd @ b) + j * (ad @ b + a @ bd)
    )
    o = jump.nu * a + jump.u * np.exp(1j * jump.theta) * b
    collapse = [
        (2.0 * two_pi * jump.tau, o),
        (2.0 * two_pi * model.modes[0].intrinsic_damping, a),
        (2.0 * two_pi * model.modes[1].intrinsic_damping, b),
    ]
    d = a.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    hs = sp.csr_matrix(h)
    # vec(A rho B) = (A kron B^T) vec(rho) for row-major vec
    gen = -1j * (sp.kron(hs, eye) - sp.kron(eye, hs.T))
    for rate, c in collapse:
        if rate == 0:
            continue
        cs = sp.csr_matrix(c)
        cdc = sp.csr_matrix(c.conj().T @ c)
        gen = gen + rate * (sp.kron(cs, cs.conj()) - 0.5 * sp.kron(cdc, eye) - 0.5 * sp.kron(eye, cdc.T))
    return sp.csr_matrix(gen)


def rate_scale(model: SystemModel, jump: JumpOperatorSpec, frame: float | None = None) -> float:
    """Fastest first-moment rate in rad/s; the step must satisfy ``dt * rate < 0.05``."""
    if frame is None:
        frame = model.modes[0].f
    j = _two_mode(model)
    detune = max(abs(m.f - frame) for m in model.modes)
    damp = max(
        model.modes[0].intrinsic_damping + jump.kappa,
        model.modes[1].intrinsic_damping + jump.gamma,
    )
    return 2.0 * math.pi * (detune + damp + abs(j) + abs(jump.cooperative))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    n_max: int
    max_trace_drift: float
    max_hermiticity_error: float
    min_eigenvalue: float
    max_top_population: float

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> DensityMatrix:
        return DensityMatrix(self.states[k], self.n_max)

    def moments(self) -> np.ndarray:
        """Array of shape ``(len, 2)`` with ``<a>`` and ``<b>`` at each stored time."""
        a, b = ladder_operators(self.n_max)
        ma = np.einsum("ij,tji->t", a, self.states)
        mb = np.einsum("ij,tji->t", b, self.states)
        return np.stack([ma, mb], axis=1)


def evolve_master_equation(
    model: SystemModel,
    jump: JumpOperatorSpec,
    rho0: DensityMatrix,
    t_final: float,
    dt: float,
    store_every: int = 1,
    frame: float | None = None,
    check_positivity: bool = True,
) -> Trajectory:
    """Integrate the master equation with fixed-step RK4 from 0 to ``t_final``.

    ``dt`` is rounded down so that an integer number of steps lands exactly on
    ``t_final``. Raises :class:`IntegratorError` when the trace drifts by more
    than 1e-6 or the top Fock level holds more than 1e-6 population.
    """
    if rho0.n_max < 2:
        raise ModelError("Fock cutoff must be >= 2 for the master equation")
    if t_final <= 0 or dt <= 0:
        raise ModelError("t_final and dt must be positive")
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    dt = t_final / n_steps
    rate = rate_scale(model, jump, frame)
    if dt * rate >= MAX_STEP_RATE:
        raise ModelError(f"step too coarse: dt * rate = {dt * rate:.3g} >= {MAX_STEP_RATE}")

    gen = liouvillian(model, jump, rho0.n_max, frame)
    d = rho0.data.shape[0]
    y = rho0.data.reshape(-1).astype(complex).copy()
    times = [0.0]
    states = [rho0.data.copy()]
    diag_idx = np.arange(d) * (d + 1)
    half = 0.5 * dt
    for step in range(1, n_steps + 1):
        k1 = gen @ y
        k2 = gen @ (y + half * k1)
        k3 = gen @ (y + half * k2)
        k4 = gen @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % store_every == 0 or step == n_steps:
            drift = abs(y[diag_idx].sum() - 1.0)
            if drift > TRACE_ERROR:
                raise IntegratorError(f"trace drift {drift:.3g} at t = {step * dt:.6g} s; reduce dt")
            times.append(step * dt)
            states.append(y.reshape(d, d).copy())

    states = np.array(states)
    rhos = [DensityMatrix(s, rho0.n_max) for s in states]
    leak = max(r.top_population() for r in rhos)
    if leak > LEAKAGE_ERROR:
        raise IntegratorError(f"Fock cutoff leakage {leak:.3g} exceeds {LEAKAGE_ERROR}; raise n_max")
    drift = max(abs(np.trace(s) - 1.0) for s in states)
    herm = max(r.hermiticity_error() for r in rhos)
    min_eig = min(r.min_eigenvalue() for r in rhos) if check_positivity else float("nan")
    return Trajectory(np.array(times), states, rho0.n_max, float(drift), herm, min_eig, leak)


def effective_moments(model: SystemModel, v0, times, frame: float | None = None) -> np.ndarray:
    """``v(t) = exp(-2 pi i (M - f_frame) t) v0`` for each time, shape ``(len, n)``."""
    if frame is None:
        frame = model.modes[0].f
    m = dynamics_matrix(model) - frame * np.eye(model.n_modes)
    v0 = np.asarray(v0, dtype=complex)
    return np.array([expm(-2j * math.pi * m * t) @ v0 for t in times])


def characteristic_period(model: SystemModel) -> float:
    """Beat period ``1 / (2 |g|)`` of the coupled pair, ``g^2 = M01 M10``.

    Falls back to the slowest decay time for an uncoupled model.
    """
    m = dynamics_matrix(model)
    g = math.sqrt(abs(m[0, 1] * m[1, 0])) if model.n_modes == 2 else 0.0
    if g > 0:
        return 1.0 / (2.0 * g)
    damp = max(mode.total_damping for mode in model.modes)
    if damp > 0:
        return 1.0 / damp
    return 1.0 / max(abs(mode.f - model.modes[0].f) for mode in model.modes)


@dataclass(frozen=True)
class OracleReport:
    times: np.ndarray
    master: np.ndarray
    effective: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    dt: float
    trajectory: Trajectory


def oracle_report(
    model: SystemModel,
    jump: JumpOperatorSpec,
    rho0: DensityMatrix,
    t_final: float,
    dt: float | None = None,
    n_samples: int = 200,
    frame: float | None = None,
) -> OracleReport:
    """Compare master-equation first moments with the effective linear dynamics.

    Initial amplitudes must satisfy ``|<a>|, |<b>| <= MAX_AMPLITUDE`` so the
    Fock cutoff is not the limiting error.
    """
    amp = max(abs(x) for x in first_moments(rho0))
    if amp > MAX_AMPLITUDE:
        raise ModelError(f"initial amplitude {amp:.3g} exceeds {MAX_AMPLITUDE} (cutoff leakage)")
    if dt is None:
        dt = 0.01 / rate_scale(model, jump, frame)
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    store_every = max(1, n_steps // n_samples)
    traj = evolve_master_equation(model, jump, rho0, t_final, dt, store_every, frame)
    master = traj.moments()
    v0 = master[0]
    norm0 = np.linalg.norm(v0)
    if norm0 == 0:
        raise ModelError("initial state has vanishing first moments; nothing to compare")
    eff = effective_moments(model, v0, traj.times, frame)
    dev = np.linalg.norm(master - eff, axis=1) / norm0
    return OracleReport(traj.times, master, eff, dev, float(dev.max()), t_final / n_steps, traj)


def oracle_compare(
    model: SystemModel,
    jump: JumpOperatorSpec,
    rho0: DensityMatrix,
    t_final: float,
    dt: float | None = None,
) -> float:
    """Max over sampled times of ``|<v>_master - v_eff| / |v(0)|``."""
    return oracle_report(model, jump, rho0, t_final, dt).max_deviation
