"""Modes, couplings and the complex dynamics matrix.

Units
-----
Every frequency and rate is a *linear* frequency in Hz (f = omega / 2 pi).
Damping enters the diagonal as the full sum ``-i (intrinsic + external)``;
this is the convention of the coupled-mode equations of motion

    da/dt = -i w_c a - (beta + kappa) a - (iJ + Gamma) b

and differs by a factor two from the half-width convention that the plain
Lindblad dissipator L[a] produces (see :mod:`cavmag.lindblad`).
The state vector evolves as ``dv/dt = -2 pi i M v``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import ModelError

__all__ = [
    "ModeParams",
    "CouplingMode",
    "CouplingSpec",
    "SystemModel",
    "PairReport",
    "PassivityReport",
    "build_system",
    "dynamics_matrix",
    "cooperative_rate",
    "validate_passivity",
    "with_detuning",
]


@dataclass(frozen=True)
class ModeParams:
    """A single damped bosonic mode.

    ``intrinsic_damping`` is alpha for a magnon or beta for a cavity mode;
    ``external_damping`` is the radiative rate into the travelling wave
    (gamma for the magnon, kappa for the cavity).
    """

    label: str
    f: float
    intrinsic_damping: float = 0.0
    external_damping: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.f) and self.f > 0):
            raise ModelError(f"mode {self.label!r}: frequency must be > 0, got {self.f}")
        for name in ("intrinsic_damping", "external_damping"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ModelError(f"mode {self.label!r}: {name} must be >= 0, got {value}")

    @property
    def total_damping(self) -> float:
        return self.intrinsic_damping + self.external_damping

    @property
    def complex_frequency(self) -> complex:
        return complex(self.f, -self.total_damping)


class CouplingMode(str, enum.Enum):
    EXPLICIT = "explicit"
    FROM_BATH = "from_bath"


@dataclass(frozen=True)
class CouplingSpec:
    """Complex coupling ``J - i Gamma e^{i theta}`` between two modes.

    With ``mode=FROM_BATH`` the dissipative strength is not an input: it is
    resolved to ``sqrt(kappa * gamma)`` of the two endpoint modes when the
    system is built.
    """

    j: float = 0.0
    gamma_d: float = 0.0
    theta: float = 0.0
    mode: CouplingMode = CouplingMode.EXPLICIT

    def __post_init__(self):
        object.__setattr__(self, "mode", CouplingMode(self.mode))
        if not math.isfinite(self.j) or self.j < 0:
            raise ModelError(f"coherent coupling J must be >= 0, got {self.j}")
        if not math.isfinite(self.gamma_d) or self.gamma_d < 0:
            raise ModelError(f"dissipative coupling Gamma must be >= 0, got {self.gamma_d}")
        if not (-math.pi <= self.theta <= math.pi):
            raise ModelError(f"phase theta must lie in [-pi, pi], got {self.theta}")

    @property
    def forward(self) -> complex:
        """Matrix element M[i][j] for the pair (i, j)."""
        return self.j - 1j * self.gamma_d * np.exp(1j * self.theta)

    @property
    def backward(self) -> complex:
        """Matrix element M[j][i] for the pair (i, j)."""
        return self.j - 1j * self.gamma_d * np.exp(-1j * self.theta)


PASSIVITY_RTOL = 1e-12


@dataclass(frozen=True)
class PairReport:
    i: int
    j: int
    gamma_sq: float
    bound: float

    @property
    def passive(self) -> bool:
        # relative slack absorbs the rounding of sqrt(kappa * gamma)**2
        return self.gamma_sq <= self.bound * (1.0 + PASSIVITY_RTOL)


@dataclass(frozen=True)
class PassivityReport:
    pairs: tuple[PairReport, ...]

    @property
    def passive(self) -> bool:
        return all(p.passive for p in self.pairs)

    @property
    def warnings(self) -> list[str]:
        return [
            f"pair ({p.i}, {p.j}) is non-passive: Gamma^2 = {p.gamma_sq:.6g} Hz^2 "
            f"> (beta+kappa)(alpha+gamma) = {p.bound:.6g} Hz^2"
            for p in self.pairs
            if not p.passive
        ]


@dataclass(frozen=True)
class SystemModel:
    """Validated set of modes and couplings.

    ``couplings`` maps an ordered index pair ``(i, j)`` to its resolved
    :class:`CouplingSpec`; the phase ``theta`` rotates the ``i -> j`` element
    by ``e^{+i theta}`` and the reverse element by ``e^{-i theta}``.
    ``drive_port`` is the mode attached to the travelling-wave line (the
    cavity), or ``None`` for an undriven model.
    """

    modes: tuple[ModeParams, ...]
    couplings: Mapping[tuple[int, int], CouplingSpec] = field(default_factory=dict)
    drive_port: int | None = 0
    passive: bool = True

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def coupling(self, i: int, j: int) -> CouplingSpec | None:
        return self.couplings.get((i, j))

    @property
    def drive_mode(self) -> ModeParams:
        if self.drive_port is None:
            raise ModelError("model has no drive port")
        return self.modes[self.drive_port]

    def detunings(self) -> np.ndarray:
        """Mode frequencies relative to the drive-port mode, ``f_k - f_c``."""
        ref = self.modes[self.drive_port or 0].f
        return np.array([m.f - ref for m in self.modes])


def cooperative_rate(kappa: float, gamma: float) -> float:
    """Dissipative coupling sustained by a shared bath, ``sqrt(kappa * gamma)``."""
    if kappa < 0 or gamma < 0:
        raise ModelError(f"external rates must be >= 0, got kappa={kappa}, gamma={gamma}")
    return math.sqrt(kappa * gamma)


def _resolve(spec: CouplingSpec, a: ModeParams, b: ModeParams) -> CouplingSpec:
    if spec.mode is CouplingMode.FROM_BATH:
        return replace(spec, gamma_d=cooperative_rate(a.external_damping, b.external_damping))
    return spec


def _pair_reports(modes, couplings) -> PassivityReport:
    reports = []
    for (i, j), spec in couplings.items():
        bound = modes[i].total_damping * modes[j].total_damping
        reports.append(PairReport(i, j, spec.gamma_d**2, bound))
    return PassivityReport(tuple(reports))


def build_system(
    modes: Iterable[ModeParams],
    couplings: Iterable[tuple[int, int, CouplingSpec]] = (),
    drive_port: int | None = 0,
) -> SystemModel:
    """Validate modes and couplings and resolve bath-derived couplings."""
    modes = tuple(modes)
    if not modes:
        raise ModelError("a system needs at least one mode")
    for m in modes:
        if not isinstance(m, ModeParams):
            raise ModelError(f"expected ModeParams, got {type(m).__name__}")
    n = len(modes)
    if drive_port is not None and not (0 <= drive_port < n):
        raise ModelError(f"drive_port {drive_port} out of range for {n} modes")

    resolved: dict[tuple[int, int], CouplingSpec] = {}
    for i, j, spec in couplings:
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"coupling ({i}, {j}) references a mode index outside 0..{n - 1}")
        if i == j:
            raise ModelError(f"coupling ({i}, {j}) couples a mode to itself")
        if (i, j) in resolved or (j, i) in resolved:
            raise ModelError(f"duplicate coupling for pair ({i}, {j})")
        resolved[(i, j)] = _resolve(spec, modes[i], modes[j])

    report = _pair_reports(modes, resolved)
    return SystemModel(modes, resolved, drive_port, report.passive)


def validate_passivity(model: SystemModel) -> PassivityReport:
    """Compare Gamma^2 against (beta+kappa)(alpha+gamma) for every pair.

    Non-passive pairs are reported, never rejected: explicit-Gamma effective
    models are routinely run in that regime.
    """
    return _pair_reports(model.modes, model.couplings)


def dynamics_matrix(model: SystemModel) -> np.ndarray:
    """Complex frequency matrix M in Hz, with ``dv/dt = -2 pi i M v``."""
    n = model.n_modes
    m = np.zeros((n, n), dtype=complex)
    for k, mode in enumerate(model.modes):
        m[k, k] = mode.complex_frequency
    for (i, j), spec in model.couplings.items():
        m[i, j] = spec.forward
        m[j, i] = spec.backward
    return m


def with_detuning(model: SystemModel, delta: float, mode: int = 1, reference: int | None = None) -> SystemModel:
    """Copy of ``model`` with mode ``mode`` moved to ``f_ref + delta``.

    ``reference`` defaults to the drive port. Couplings keep their resolved
    values (detuning does not change any rate).
    """
    ref = model.drive_port if reference is None else reference
    if ref is None:
        ref = 0
    modes = list(model.modes)
    modes[mode] = replace(modes[mode], f=modes[ref].f + delta)
    return replace(model, modes=tuple(modes))
