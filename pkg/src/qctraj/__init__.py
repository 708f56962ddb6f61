"""Trajectory-ensemble closures for mixed quantum-classical dynamics.

Three models share one state container and integrator: independent
trajectories (each carrying its own wavefunction), a shared density matrix
driven by the weighted average Hamiltonian, and a regularized closure in
which Gaussian-smeared trajectories exchange quantum population through
kernel-overlap integrals while conserving a discrete ensemble Hamiltonian.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DivergenceError,
    GeometryError,
    InternalError,
    QCTrajError,
    StalenessError,
)
from .model import (
    ClosureState,
    DensityMatrix,
    HamiltonianTerm,
    HybridHamiltonian,
    PhasePoint,
    PureState,
    Weights,
    density_matrix,
    ensemble_rho,
    sample_phase_points,
)
from .hamiltonian import (
    OperatorField,
    ehrenfest_field,
    eval_H,
    eval_H_many,
    expectation_gradients,
    monomial_fields,
)
from .kernels import (
    JTable,
    KernelIntegralTable,
    KernelTableBuilder,
    Mollifier,
    QuadratureGrid,
    compute_I,
    compute_J,
    compute_dI,
    j_values,
    kernel_eval,
    kernel_grad,
)
from .dynamics import (
    EffectiveGenerator,
    HybridOperatorField,
    StateDerivative,
    effective_generators,
    gradient_h,
    hamiltonian_h,
    hybrid_operator_field,
    rhs_ehrenfest,
    rhs_meanfield,
    rhs_regularized,
)
from .integrate import (
    RunResult,
    Trajectory,
    integrate,
    self_convergence_slope,
    state_distance,
    step_rk4,
)
from .diagnostics import DiagnosticsRecord, purity, record, summarize
from .config import (
    InitialConfig,
    RunConfig,
    apply_overrides,
    build_state,
    config_from_dict,
    load_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
