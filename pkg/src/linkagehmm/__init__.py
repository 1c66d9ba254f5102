"""Ancestry inference under a marker-linkage HMM.

A hidden Markov model ties the ancestral origin of neighbouring markers
together through the genetic map; its r = INFINITY limit is the classical
marker-independent admixture model.  The package provides the normalized
log-likelihood, maximum-likelihood fits with CLT-based uncertainty, the
nested likelihood-ratio test between the two models, a simulator, and a
Monte-Carlo evaluation harness.
"""

from .errors import (
    ConfigError,
    InvalidComparisonError,
    InvalidGenotypeError,
    InvalidInputError,
    InvalidMapError,
    InvalidParameterError,
    LinkageHMMError,
    NumericError,
    ParseError,
    SizeGuardError,
    StructuralError,
)
from .harness import (
    ConsistencyResult,
    CoverageResult,
    ErrorGridResult,
    consistency_experiment,
    coverage_experiment,
    error_rate_experiment,
)
from .inference import (
    CovarianceEstimate,
    ModelFit,
    PopulationFit,
    covariance_mle,
    fit_admixture,
    fit_linkage,
    fit_population,
)
from .io import (
    PanelDataset,
    PanelSummary,
    leave_one_out_frequencies,
    load_frequencies,
    load_genotypes,
    load_labels,
    load_map,
    summarize_panel,
    write_frequencies,
    write_genotypes,
    write_labels,
    write_map,
)
from .likelihood import (
    LikelihoodResult,
    admixture_loglik,
    brute_force_loglik,
    forward_loglik,
    numerical_gradient,
    numerical_hessian,
)
from .lrt import (
    TestResult,
    chi2_quantile,
    chi2_sf,
    lrt_statistic,
    run_population_test,
    run_test,
)
from .model import (
    DIPLOID,
    EMISSION_PAPER_LITERAL,
    EMISSION_STANDARD,
    HAPLOID,
    INFINITY,
    MISSING,
    AlleleFrequencySet,
    AssumptionConfig,
    AssumptionReport,
    GeneticMap,
    GenotypeData,
    ParameterPoint,
    emission_vector,
    second_eigenvalue,
    transition_matrix,
    validate_assumptions,
)
from .simulate import (
    SimulationConfig,
    config_map,
    generate_frequencies,
    rng_stream,
    simulate_admixture,
    simulate_linkage,
)

__version__ = "0.1.0"
