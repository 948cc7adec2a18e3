"""Minimal quantum dynamical semigroups on finite truncations:
explosion observables, Laplace-domain diagnostics, conservativity
verdicts with certificates, and a defect-index lab.
"""

from .tolerances import Tolerances, DEFAULT
from .core import (
    QdsLabError,
    StructureError,
    DomainError,
    ConvergenceError,
    NotApplicableError,
    TruncatedSpace,
    HermitianForm,
    ModelSpec,
    ValidationReport,
    apply_phi,
    apply_generator,
    predual_generator,
    phi_choi_matrix,
    validate_model,
)
from .semigroup import (
    Propagator,
    EvolutionResult,
    propagator,
    evolve_observable,
    minimal_iteration,
    predual_evolve,
)
from .resolvent import (
    LaplaceContext,
    ExplosionCertificate,
    SweepResult,
    AnnihilatorResult,
    q_lambda,
    ell_lambda,
    q_power_limit,
    explosion_transform,
    conservativity_verdict,
    resolvent_quadrature,
    verify_explosion_solution,
    predual_annihilator_check,
    truncation_sweep,
    VERDICT_CONSERVATIVE,
    VERDICT_EXPLOSIVE,
    VERDICT_INCONCLUSIVE,
    TREND_DECAY,
    TREND_STABLE,
)
from .deficiency import (
    TauFModel,
    DeficiencyResult,
    ExtensionSpec,
    deficiency_vectors_tau_f,
    deficiency_indices_tau_f,
    cayley_deficiency_from_isometry,
    von_neumann_extension,
    defect_projector_certificate,
    isometric_restriction_verdict,
)
from .catalog import (
    IsometrySpec,
    build_pure_birth,
    birth_family,
    build_tau_f_transport,
    transport_family,
    build_bounded_lindblad,
    build_unitary,
    build_shift_isometry,
    CATALOG,
)
from .config import RunConfig, resolve_model

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
