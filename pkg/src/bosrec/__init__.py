"""Density matrices of bosonic modes rebuilt from normally-ordered moments."""

from .density import DensityMatrix, coherent, fidelity, fock, max_deviation, random_density, thermal
from .lindblad import TraceDriftError, build_system, integrate, simulate
from .model import (
    ArbitraryMatrix,
    Coherent,
    Envelopes,
    ModelParams,
    Thermal,
    TwoModeMomentProvider,
    coherent_amplitudes,
    envelopes,
    fock_state,
    joint_density,
    joint_element,
    lambdas,
    reduced_density,
    swap_modes,
    thermal_beta,
    thermal_betas,
)
from .numerics import LogFactorialTable, TableSizeError, log_factorial
from .reconstruction import (
    CoherentProvider,
    FockProvider,
    MatrixMomentProvider,
    ProductProvider,
    Reconstructor,
    ThermalProvider,
    TruncationError,
    TruncationPolicy,
    VacuumProvider,
    density_matrix_element,
    moment_coefficient,
    reconstruct,
)

__version__ = "0.1.0"
