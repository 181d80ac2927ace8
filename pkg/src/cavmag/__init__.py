"""Coupled cavity-magnon modelling: coherent and dissipative coupling.

Frequencies and rates are linear frequencies in Hz throughout; the dynamics
are ``dv/dt = -2 pi i M v`` with ``M`` the complex dynamics matrix.
"""

from .errors import (
    CavmagError,
    ConfigError,
    DivergenceError,
    EigenSolverError,
    FitError,
    IntegratorError,
    ModelError,
    NoFeatureError,
    SingularEvaluationError,
    SingularJacobianError,
    SpectrumFileError,
)
from .model import (
    CouplingMode,
    CouplingSpec,
    ModeParams,
    SystemModel,
    build_system,
    cooperative_rate,
    dynamics_matrix,
    validate_passivity,
    with_detuning,
)
from .eigen import (
    Branch,
    dispersion_sweep,
    find_exceptional_points,
    n_mode_eigenvalues,
    two_mode_eigenvalues,
)
from .scattering import (
    SpectrumMap,
    SpectrumTrace,
    smatrix_direction,
    spectrum_map,
    spectrum_trace,
    symmetry_metric,
    transmission_eq13,
)
from .lindblad import (
    DensityMatrix,
    JumpOperatorSpec,
    evolve_master_equation,
    first_moments,
    oracle_compare,
    oracle_report,
)
from .mechanisms import (
    AuxiliaryModeParams,
    ElectrodynamicParams,
    TwoToneParams,
    aux_geff,
    aux_geff_map,
    aux_reduction_error,
    classify_effective_coupling,
    electrodynamic_roots,
    twotone_effective,
)
from .estimation import FitResult, SpectrumData, fit_spectrum, initial_guess, synthetic_spectrum

__version__ = "0.1.0"
