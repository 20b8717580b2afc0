"""Hypothesis-testing view of how fast an evolving pure state becomes distinguishable."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    EnergyMoments,
    HamiltonianSchedule,
    HermitianOperator,
    PureState,
    average_hamiltonian,
    energy_moments,
    evolve_constant,
    evolve_schedule,
    pauli,
    sudden_error_exact,
    sudden_error_perturbative,
)
from .experiments import (  # noqa: E402
    Model,
    discernibility_sweep,
    measurement_optimality_study,
    sudden_scaling_study,
    uncertainty_condition,
    vertex_anomaly_study,
)
from .hypothesis_testing import (  # noqa: E402
    LikelihoodRatioTest,
    TestPerformance,
    beta_star,
    gamma_max,
    monte_carlo_power,
    mp_test,
    power_approx_fisher,
    power_approx_stein,
    stein_exponent,
    test_performance,
)
from .information import (  # noqa: E402
    FisherReport,
    classical_fisher_analytic,
    classical_fisher_fd,
    kl_divergence,
    kl_fisher_expansion_ratio,
    quantum_fisher,
    quantum_fisher_energy,
)
from .measurement import (  # noqa: E402
    OutcomeDistribution,
    Povm,
    outcome_distribution,
    projector_test_povm,
    random_povm,
    sld_optimal_povm,
)
