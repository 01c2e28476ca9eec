"""Kinetics of two-photon decay cascades from entangled atom pairs.

Closed-form populations and photon distributions, the transcendental
single-atom lifetime equation and its solver, a reproducible Monte Carlo
event generator with a detector model, and maximum-likelihood /
histogram-fit rate estimation.
"""

from .errors import (
    FitError,
    IntegrationError,
    ParameterError,
    SchemaError,
    SolverError,
)
from .estimate import (
    FitResult,
    apparent_lifetime,
    estimate_rates,
    fit_cumulative_curves,
    fit_histogram_rate,
    formation_time_bias,
    full_pipeline,
    mle_exponential_rate,
    pipeline_summary,
    tau_standard_error,
)
from .histogram import Histogram
from .kinetics import (
    EPS_DEGENERATE,
    PhotonDistributions,
    PopulationState,
    RateParameters,
    coincidence_density,
    entangled_population,
    first_photon_distribution,
    ground_population,
    ode_oracle,
    photon_distributions,
    population_curve,
    population_state,
    product_unstable_population,
    second_photon_distribution,
)
from .lifetime import (
    LifetimeSolution,
    equation_residual,
    lifetime_residual,
    lifetime_sweep,
    solve_lifetime,
)
from .simulate import (
    DecayEvent,
    DetectorModel,
    EventSet,
    coincidence_histogram,
    empirical_populations,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "EPS_DEGENERATE",
    "DecayEvent",
    "DetectorModel",
    "EventSet",
    "FitError",
    "FitResult",
    "Histogram",
    "IntegrationError",
    "LifetimeSolution",
    "ParameterError",
    "PhotonDistributions",
    "PopulationState",
    "RateParameters",
    "SchemaError",
    "SolverError",
    "apparent_lifetime",
    "coincidence_density",
    "coincidence_histogram",
    "empirical_populations",
    "entangled_population",
    "equation_residual",
    "estimate_rates",
    "first_photon_distribution",
    "fit_cumulative_curves",
    "fit_histogram_rate",
    "formation_time_bias",
    "full_pipeline",
    "ground_population",
    "lifetime_residual",
    "lifetime_sweep",
    "mle_exponential_rate",
    "ode_oracle",
    "photon_distributions",
    "pipeline_summary",
    "population_curve",
    "population_state",
    "product_unstable_population",
    "second_photon_distribution",
    "simulate",
    "solve_lifetime",
    "tau_standard_error",
]
