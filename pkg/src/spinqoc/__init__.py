"""spinqoc: optimal control of quantum Fisher information for dissipative
collective-spin systems, with Pontryagin-principle diagnostics."""

__version__ = "0.1.0"

from .channels import ChannelSpec, df_basis, dissipator
from .dynamics import (
    AugmentedTrajectory,
    ControlProtocol,
    CostateTrajectory,
    ModelSpec,
    coherent_x_state,
    hl_state_density,
    propagate_costate_backward,
    propagate_forward,
)
from .fisher import (
    AsymptoticCoeffs,
    asymptotic_qfi,
    cfi,
    cfi_costate_boundary,
    extract_asymptotic_coeffs,
    qfi,
    qfi_costate_boundary,
    sld,
    sld_partials,
)
from .operators import bar_symmetrize, collective_spin, hermitian_eig, pauli
from .optimize import (
    OptimizationResult,
    OptimizerConfig,
    gradient_step,
    optimize_protocol,
    scan_qfi_vs_T,
    singular_self_consistency,
)
from .pmp import (
    PmpDiagnostics,
    check_first_order,
    check_legendre_clebsch,
    control_hamiltonian,
    second_order_quantities,
    singular_control,
    switching_function,
)

__all__ = [
    "AsymptoticCoeffs",
    "AugmentedTrajectory",
    "ChannelSpec",
    "ControlProtocol",
    "CostateTrajectory",
    "ModelSpec",
    "OptimizationResult",
    "OptimizerConfig",
    "PmpDiagnostics",
    "asymptotic_qfi",
    "bar_symmetrize",
    "cfi",
    "cfi_costate_boundary",
    "check_first_order",
    "check_legendre_clebsch",
    "coherent_x_state",
    "collective_spin",
    "control_hamiltonian",
    "df_basis",
    "dissipator",
    "extract_asymptotic_coeffs",
    "gradient_step",
    "hermitian_eig",
    "hl_state_density",
    "optimize_protocol",
    "pauli",
    "propagate_costate_backward",
    "propagate_forward",
    "qfi",
    "qfi_costate_boundary",
    "scan_qfi_vs_T",
    "second_order_quantities",
    "singular_control",
    "singular_self_consistency",
    "sld",
    "sld_partials",
    "switching_function",
]
