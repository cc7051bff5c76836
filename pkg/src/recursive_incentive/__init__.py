"""Recursive incentive mechanism for diffusion-based task execution.

Payments along recruitment chains, equilibrium analysis of recruitment
strategies, cascade simulation and cascade statistics.
"""

from .analysis import (
    CascadeStats,
    DiscretePowerLaw,
    ExponentialDelay,
    ExponentialFit,
    PowerLawFit,
    compute_stats,
    fit_exponential,
    fit_power_law,
    inter_signup_times,
    recruitment_timeline,
)
from .diffusion import (
    DiffusionConfig,
    check_monotonic,
    equilibrium_on_graph,
    run_cascade,
    sample_finders,
)
from .game import (
    EpsilonModel,
    StrategyProfile,
    brute_force_equilibrium,
    expected_payment_uniform,
    expected_reward_epsilon,
    is_all_recruit_nash,
    is_selective_recruit_nash,
    prefers_recruit_all,
    prefers_selective_recruit_all,
    recruited_subforest,
    weight,
)
from .mechanism import (
    PaymentLedger,
    SuccessModel,
    Task,
    TaskEnvironment,
    chain_payment,
    check_budget,
    false_name_reward,
    settle,
)
from .network import (
    DescendantProfile,
    RecruitmentForest,
    RecruitmentRecord,
    SocialGraph,
    WinningSequence,
    descendant_profile,
    load_cascade,
    load_graph,
    path_to_root,
)

__version__ = "0.1.0"
