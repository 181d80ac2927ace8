"""Complex eigenfrequencies, branch-tracked dispersion and exceptional points.

Eigenvalues are complex frequencies in Hz: the real part is the hybridized
mode frequency, minus the imaginary part is its linewidth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import EigenSolverError, ModelError
from .model import SystemModel, dynamics_matrix, with_detuning

__all__ = [
    "Branch",
    "eigenvalues_2x2",
    "two_mode_eigenvalues",
    "n_mode_eigenvalues",
    "dispersion_sweep",
    "discriminant",
    "find_exceptional_points",
]


@dataclass(frozen=True)
class Branch:
    label: str
    detuning: np.ndarray
    values: np.ndarray

    @property
    def frequency(self) -> np.ndarray:
        return self.values.real

    @property
    def linewidth(self) -> np.ndarray:
        return -self.values.imag


def eigenvalues_2x2(m: np.ndarray) -> tuple[complex, complex]:
    """Closed-form eigenvalues of a 2x2 matrix, ``+`` root first.

    ``mean +- sqrt(((m00 - m11)/2)^2 + m01 m10)`` with the principal branch of
    the square root.
    """
    mean = 0.5 * (m[0, 0] + m[1, 1])
    half = 0.5 * (m[0, 0] - m[1, 1])
    root = np.sqrt(complex(half * half + m[0, 1] * m[1, 0]))
    return complex(mean + root), complex(mean - root)


def _require_two_modes(model: SystemModel):
    if model.n_modes != 2:
        raise ModelError(f"two-mode operation called on a {model.n_modes}-mode model")


def two_mode_eigenvalues(model: SystemModel) -> tuple[complex, complex]:
    """Eigenvalues of the effective two-mode Hamiltonian with coupling J - i Gamma."""
    _require_two_modes(model)
    if len(model.couplings) > 1:
        raise ModelError("two-mode model carries more than one coupling")
    for spec in model.couplings.values():
        if spec.theta != 0:
            raise ModelError("two_mode_eigenvalues requires theta = 0")
    return eigenvalues_2x2(dynamics_matrix(model))


def n_mode_eigenvalues(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ModelError(f"expected a square matrix, got shape {m.shape}")
    try:
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge: {exc}") from exc


def _eig(m):
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigensolver did not converge: {exc}") from exc
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    return vals, vecs


def _degenerate(vecs, tol):
    """True when two eigenvectors are (nearly) parallel, as at an EP."""
    n = vecs.shape[1]
    if n < 2:
        return False
    gram = np.abs(vecs.conj().T @ vecs)
    np.fill_diagonal(gram, 0.0)
    return gram.max() > 1.0 - tol


def dispersion_sweep(
    model: SystemModel,
    detunings,
    swept_mode: int = 1,
    ep_tolerance: float = 1e-6,
) -> list[Branch]:
    """Branch-sorted eigenvalues while the swept mode is detuned from the drive mode.

    Branches are continued by maximal eigenvector overlap between adjacent
    grid points, with eigenvalue distance as a tie-break. Where eigenvectors
    are nearly parallel (within ``ep_tolerance``, i.e. close to an exceptional
    point) overlap is meaningless and continuation falls back to distance
    from a linear extrapolation of each branch.
    """
    grid = np.asarray(detunings, dtype=float).ravel()
    if grid.size == 0:
        raise ModelError("empty detuning grid")
    if model.n_modes < 2:
        raise ModelError("dispersion needs at least two modes")
    n = model.n_modes
    out = np.empty((grid.size, n), dtype=complex)
    prev_vecs = None
    for k, delta in enumerate(grid):
        vals, vecs = _eig(dynamics_matrix(with_detuning(model, delta, swept_mode)))
        if prev_vecs is None:
            order = np.argsort(-vals.real, kind="stable")
        else:
            scale = max(np.abs(out[k - 1]).max(), 1.0)
            target = out[k - 1] if k < 2 else 2 * out[k - 1] - out[k - 2]
            dist = np.abs(target[:, None] - vals[None, :]) / scale
            if _degenerate(vecs, ep_tolerance) or _degenerate(prev_vecs, ep_tolerance):
                cost = dist
            else:
                overlap = np.abs(prev_vecs.conj().T @ vecs)
                cost = -overlap + 1e-3 * dist
            _, order = linear_sum_assignment(cost)
        out[k] = vals[order]
        prev_vecs = vecs[:, order]
    if n == 2:
        labels = ["upper", "lower"]
    else:
        labels = [f"branch{i}" for i in range(n)]
    return [Branch(labels[i], grid.copy(), out[:, i].copy()) for i in range(n)]


def discriminant(model: SystemModel, delta_m, swept_mode: int = 1):
    """``((w_c - w_m)/2)^2 + M01 M10`` with the swept mode at ``f_c + delta_m``.

    Vanishes at exceptional points. Computed from detunings so that values
    near 10 GHz carriers lose no precision.
    """
    _require_two_modes(model)
    m = dynamics_matrix(model)
    ref = 1 - swept_mode
    damp_ref = -m[ref, ref].imag
    damp_sw = -m[swept_mode, swept_mode].imag
    product = m[0, 1] * m[1, 0]
    delta_m = np.asarray(delta_m, dtype=float)
    # (w_ref - w_sw)/2 = (-delta_m - i (damp_ref - damp_sw)) / 2
    half = 0.5 * (-delta_m - 1j * (damp_ref - damp_sw))
    return half * half + product


def find_exceptional_points(
    model: SystemModel,
    lo: float,
    hi: float,
    num: int = 2001,
    swept_mode: int = 1,
    rtol: float = 1e-6,
) -> list[float]:
    """Real detunings in ``[lo, hi]`` where the two eigenvalues coalesce.

    Coarse scan of |discriminant|^2 on ``num`` points, Brent refinement of each
    local minimum, then Newton polishing on the analytic discriminant. A
    candidate is kept when ``|disc| < rtol * (J^2 + Gamma^2)``; with zero
    coupling the threshold is zero and diabolic crossings are never reported.
    """
    _require_two_modes(model)
    if not hi > lo:
        raise ModelError("search range must satisfy lo < hi")
    m = dynamics_matrix(model)
    coupling_scale = sum(s.j**2 + s.gamma_d**2 for s in model.couplings.values())
    threshold = rtol * coupling_scale
    if threshold <= 0:
        return []

    def f(x):
        d = discriminant(model, x, swept_mode)
        return float(abs(d) ** 2)

    grid = np.linspace(lo, hi, num)
    vals = np.abs(discriminant(model, grid, swept_mode)) ** 2
    step = grid[1] - grid[0]
    candidates = []
    for k in range(num):
        left = vals[k - 1] if k > 0 else np.inf
        right = vals[k + 1] if k < num - 1 else np.inf
        if vals[k] <= left and vals[k] <= right:
            a, b = max(lo, grid[k] - step), min(hi, grid[k] + step)
            res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-9 * step})
            x = float(res.x)
            # d/d(delta) of the discriminant is -half
            damp_diff = m[1 - swept_mode, 1 - swept_mode].imag - m[swept_mode, swept_mode].imag
            for _ in range(8):
                d = discriminant(model, x, swept_mode)
                deriv = 0.5 * (x - 1j * damp_diff)
                if deriv == 0:
                    break
                x_new = x - (d / deriv).real
                if not (lo <= x_new <= hi) or abs(discriminant(model, x_new, swept_mode)) >= abs(d):
                    break
                x = x_new
            if abs(discriminant(model, x, swept_mode)) < threshold:
                candidates.append(x)
    roots: list[float] = []
    for x in sorted(candidates):
        if not roots or abs(x - roots[-1]) > step:
            roots.append(x)
    return roots
