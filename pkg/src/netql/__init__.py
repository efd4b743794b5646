"""Boltzmann Q-learning on network polymatrix games over random graphs."""

from ._validation import ContractError, DomainError, NumericalError, ParameterError
from ._version import __version__
from .dynamics import (
    ConvergenceReport,
    DynamicsConfig,
    QLDIntegrator,
    QLearning,
    QState,
    Trajectory,
    assess_convergence,
    boltzmann,
    initial_state,
    integrate_qld,
    q_step,
    qld_vector_field,
    run_discrete,
)
from .equilibrium import (
    MonotonicityCertificate,
    QREResult,
    QRESolver,
    monotonicity_margin,
    pseudo_gradient,
    pseudo_jacobian,
    qre_fixed_point,
    theoretical_threshold,
)
from .game import (
    PolymatrixGame,
    assign_bimatrix,
    delta_identical_interests,
    make_conflict,
    make_sato,
    make_shapley,
    make_zero_sum,
    payoff,
    reward,
)
from .graph import (
    AdjacencyMatrix,
    ERParams,
    SBParams,
    SpectralBound,
    empirical_bound_coverage,
    er_bound,
    sample_er,
    sample_sb,
    sb_bound,
    spectral_radius,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
