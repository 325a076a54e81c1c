"""Stochastic energy-exchange kinetics: exact particle simulation, a
deterministic grid solver for the collision equation, and numerical
verification of the equilibrium structure."""

from .core import (
    InfeasibleReactionError,
    KernelSupportError,
    KineticsError,
    Particle,
    ParticleSystem,
    SimulationError,
    SolverBlowupError,
    TypeTable,
    UnknownTypeError,
    ValidationError,
    apply_collision,
    apply_unary,
    available_kinetic_energy,
    collision_feasible,
    renormalize_total_energy,
    total_energy,
)
from .densities import (
    DensityFamily,
    Exponential,
    GammaDensity,
    Shifted,
    ShiftedGamma,
    Tabulated,
    UniformDensity,
    density_from_spec,
    density_to_spec,
)
from .reactions import (
    BinaryChannel,
    CallableRate,
    CallableUnaryRate,
    CanonicalKernel,
    ConstantRate,
    ConstantUnaryRate,
    OutputPair,
    PowerGapRate,
    ReactionNetwork,
    ScatteringKernel,
    SumDecayRate,
    TableKernel,
    UnaryChannel,
    UniformKernel,
    canonical_split_pdf,
    sample_canonical_split,
    sample_uniform_split,
)
from .simulate import (
    CollisionEvent,
    MixtureInitial,
    SimulatorConfig,
    Snapshot,
    Trajectory,
    TypeCountsInitial,
    UnaryEvent,
    empirical_histogram,
    execute_event,
    run,
    run_ensemble,
    sample_next_event,
)
from .solver import (
    DensityGrid,
    SolverConfig,
    gain_one_type,
    integrate,
    mass,
    mean_energy,
    rhs_multitype,
    rhs_one_type,
    suggest_dt,
)
from .equilibrium import (
    CollisionRateDensity,
    CycleCheckResult,
    DiscreteChainSpec,
    EntropyCheck,
    PairReactionSpec,
    ResidualReport,
    TypedDensity,
    additive_conservation_residual,
    admissible_pair_check,
    canonical_kernel_density,
    convolution_density,
    convolution_equality_check,
    detailed_balance_residual,
    entropy_monotonicity_check,
    fixed_point_residual,
    kolmogorov_cycle_check,
    ks_distance,
    local_equilibrium_residual,
    measure_transform,
    pair_reversibility_residual,
    relative_entropy,
    sample_conserving_quadruples,
    shifted_gamma_reversibility_residual,
    two_type_unary_stationary,
    unary_energy_dependent_stationary,
    vector_particle_stationary,
)
from .scenario import Scenario, load_scenario, scenario_from_dict

__version__ = "0.1.0"
