"""Quasi-periodic response, trapping regions, basins of attraction and
finite-time blow-up sets for dissipative forced oscillators
``x'' + gamma x' + g(x) = f(omega t)``."""

from ._kernels import NUMBA_ENABLED
from .errors import (
    BracketFailure,
    ConfigError,
    DegenerateDenominator,
    EmptyRegion,
    GammaBelowThreshold,
    GammaTooSmall,
    MissingEvent,
    NewtonDiverged,
    NoTransversalRoot,
    NoValidCusp,
    QattractError,
    SmallDivisorOverflow,
    SolutionSignChange,
    WrongNonlinearity,
)
from .model import (
    ForcingBounds,
    ForcingSpectrum,
    FrequencyVector,
    Nonlinearity,
    PhaseState,
    SystemConfig,
    diophantine_margin,
    equilibrium,
    estimate_forcing_bounds,
    extreme_fields,
    forcing_eval,
    vector_field,
)
from .integrate import (
    EventSpec,
    IntegratorSettings,
    Outcome,
    Trajectory,
    crossing_sequence,
    integrate,
    integrate_error,
)
from .qpsolve import (
    FourierLattice,
    FourierSolution,
    PerturbationSeries,
    default_lattice,
    eval_many,
    eval_solution,
    harmonic_balance_solve,
    orbit_distance,
    perturbation_series,
    residual_report,
)
from .attract import (
    AttractingCore,
    ErrorState,
    FrictionEnvelope,
    StiffnessBounds,
    build_core,
    cycle_decrement,
    difference_quotient,
    friction_envelope,
    liouville_clock,
    lower_guard_curve,
    quadrant_transit_check,
    stiffness_ratio,
    stiffness_ratio_bounds,
    upper_guard_curve,
    verify_core_flux,
    verify_restoring_envelope,
)
from .regions import Arc, RegionSpec, verify_inward_flux
from .invariants import (
    BlowupRegion,
    LevelCurveRegion,
    TrappingHexagon,
    blowup_barrier_root,
    blowup_cusp_coeff,
    blowup_time_bound,
    build_blowup_region,
    build_hexagon,
    build_level_region,
    separatrix_eval,
    stay_in_hexagon,
    union_basin_estimate,
)
from .basin import (
    BasinMap,
    ClassifyBudget,
    GridSpec,
    classify_point,
    containment_check,
    sweep,
)
from .sysfile import parse_system_file, parse_system_text

__version__ = "0.1.0"
