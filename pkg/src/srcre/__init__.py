"""Design-based estimation for staggered rollout cluster randomized experiments.

Point estimators of dynamic weighted average treatment effects at three
analysis levels (individual records, cluster-period averages, scaled
cluster-period totals), their CR/HC sandwich covariances, summary estimands,
a finite-population oracle, and a reproducible simulation harness.
"""

from .data import (
    AdoptionTime,
    ColumnSchema,
    Dataset,
    DerivedWeights,
    WeightKind,
    WeightScheme,
    adoption_times,
    arm_index,
    derive_weights,
    load_dataset,
    ordered_pairs,
)
from .design import (
    Assignment,
    DesignSpec,
    enumerate_assignments,
    reveal_outcomes,
    sample_assignment,
    seed_sequence,
)
from .estimands import (
    ClassifiedPair,
    PairClass,
    SummaryEstimate,
    SummaryKind,
    SummarySpec,
    build_b,
    calendar_weighted_standin,
    classify_pair,
    estimate_summary,
)
from .estimators import (
    Adjustment,
    DwateEstimate,
    EstimatorSpec,
    Level,
    LocationShiftReport,
    fit,
    full_wls_oracle,
    location_shift_report,
)
from .oracle import (
    EfficiencyReport,
    FinitePopVariance,
    MomentsReport,
    PotentialOutcomeTable,
    efficiency_inequalities,
    epsilon_tilde,
    exhaustive_moments,
    finite_pop_variance,
    sampled_moments,
    table_aggregates,
    true_dwate,
    true_dwate_paths,
)
from .simulate import (
    SimConfig,
    SimReport,
    allocate_arms,
    dgp_study1,
    dgp_study2,
    run_replications,
    study1_roster,
    study2_roster,
)
from .variance import (
    ContrastMatrix,
    DwateCovariance,
    SandwichParts,
    contrast_Q,
    sandwich,
    stacked_Q,
    summary_se,
    wald_ci,
)

__version__ = "0.1.0"
