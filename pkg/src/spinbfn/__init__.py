"""Initial-state reconstruction for continuously measured spin systems.

Simulates the dissipative spin dynamics, synthesizes random spline
controls, estimates the initial density matrix with back-and-forth nudging
observers, and validates the estimate against an independent linear
inversion of the record.
"""

from .bfn import (
    BfnRun,
    ObserverState,
    dv_identity_residuals,
    error_trajectory,
    injection_gains,
    lyapunov_diagnostics,
    nudging_weight,
    observer_rhs_backward,
    observer_rhs_forward,
    run_bfn,
)
from .controls import (
    ControlField,
    check_theorem_precondition,
    export_field_csv,
    field_at,
    field_from_table,
    import_field_csv,
    sample_random_field,
    synthesize_phase,
)
from .dynamics import (
    MeasurementRecord,
    PhysicsConfig,
    add_noise,
    derived_seeds,
    hamiltonian_at,
    lindblad_rhs,
    measurement_operator,
    rk4_step,
    simulate_truth,
    spin1_preset,
    trajectory_min_eigenvalue,
    two_level_preset,
)
from .oracle import (
    LinearResponseMatrix,
    ReconstructionResult,
    build_response,
    reconstruct,
    response_rank,
)
from .qops import (
    BlochVector,
    angular_momentum,
    bloch_compose,
    bloch_decompose,
    commutator,
    dissipator,
    expect,
    fidelity,
    lyapunov_v,
    pauli,
    project_psd,
    random_pure_state,
    sqrtm_psd,
    traceless_hermitian_basis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
