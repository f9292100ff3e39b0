"""Power and pivot probabilities in two-tier weighted voting systems."""

from .game import (
    Coalition,
    GameError,
    PowerIndexVector,
    WeightedVotingGame,
    banzhaf,
    is_winning,
    pivotal_index,
    shapley_dp,
    shapley_exact,
    shapley_permutations,
)
from .population import (
    ConstituencyPartition,
    DistributionSpec,
    ModelError,
    PreferenceModel,
    sample_constituency_median,
    sample_lambda_vector,
)
from .pivot import PivotEstimate, essential_interval_hit_rate, estimate_pivot_probabilities, influence_profile
from .allocation import (
    AllocationRuleSpec,
    density_rule_weights,
    inverse_shapley,
    optimize_alpha,
    power_law_weights,
)

__version__ = "0.1.0"
