"""Halting bandits: games that end at the first halt, and how to play them.

Each bandit carries a reward process and a positive chance of halting at
every activation; the first halt ends the game and payouts are settled by
the chosen scheme.  The package computes solo-payout indices exactly,
decomposes bandits into index blocks, reduces the alternative payout
schemes to the core one, evaluates and samples policies on product games,
and certifies index-policy optimality against a brute-force oracle.
"""

from .errors import (
    HaltBanditError,
    InvalidRuleError,
    ModelFormatError,
    PreconditionError,
    ResourceCapError,
    SolverError,
)
from .game import (
    BlockCommitmentIndexPolicy,
    CyclicPolicy,
    GameInstance,
    GlobalHistory,
    GreedyRewardPolicy,
    IndexPolicy,
    Policy,
    SimulationResult,
    TablePolicy,
    Trace,
    TraceRow,
    current_reward,
    evaluate_exact,
    immediate_payment,
    local_times,
    round_of,
    run_policy_sampled,
    step,
    terminal_payout,
    trace_times,
)
from .indices import (
    BlockValue,
    IndexBlock,
    IndexDecomposition,
    IndexResult,
    StoppingRule,
    block_value,
    check_rule,
    enumerate_stopping_rules,
    equivalent_rewards,
    index_decomposition,
    markov_cumulative_index,
    parametric_stopping_value,
    rule_count,
    solo_index_enumerate,
    solo_index_parametric,
)
from .models import (
    MarkovBandit,
    MarkovState,
    ProfitBandit,
    TreeBandit,
    TreeEdge,
    TreeNode,
    ValidationReport,
    Violation,
    dumps_model,
    dynamics_of,
    geometric_markov,
    load_model,
    loads_model,
    normalize,
    save_model,
    to_float,
    unroll_markov,
    validate,
)
from .oracle import (
    Atom,
    AtomRun,
    GreedyDominanceReport,
    IndexOptimalityReport,
    OptimalSolution,
    atoms,
    certify_greedy_dominance,
    certify_index_optimality,
    dp_optimal,
    enumerate_policies,
    random_game,
    random_markov_bandit,
    random_profit_bandit,
    random_tree_bandit,
    run_on_atom,
)
from .pi_values import (
    policy_block_value,
    policy_prevailing_index,
    psp_value_with_policy_indices,
)
from .reductions import (
    GittinsComparison,
    PayoutModel,
    direct_index,
    gittins_compare,
    gittins_index,
    model_index,
    model_index_result,
    reduce_ccp,
    reduce_nh,
    reduce_sp,
    reduce_tp,
    reduced_bandit,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "AtomRun",
    "BlockCommitmentIndexPolicy",
    "BlockValue",
    "CyclicPolicy",
    "GameInstance",
    "GittinsComparison",
    "GlobalHistory",
    "GreedyDominanceReport",
    "GreedyRewardPolicy",
    "HaltBanditError",
    "IndexBlock",
    "IndexDecomposition",
    "IndexOptimalityReport",
    "IndexPolicy",
    "IndexResult",
    "InvalidRuleError",
    "MarkovBandit",
    "MarkovState",
    "ModelFormatError",
    "OptimalSolution",
    "PayoutModel",
    "Policy",
    "PreconditionError",
    "ProfitBandit",
    "ResourceCapError",
    "SimulationResult",
    "SolverError",
    "StoppingRule",
    "TablePolicy",
    "Trace",
    "TraceRow",
    "TreeBandit",
    "TreeEdge",
    "TreeNode",
    "ValidationReport",
    "Violation",
    "atoms",
    "block_value",
    "certify_greedy_dominance",
    "certify_index_optimality",
    "check_rule",
    "current_reward",
    "direct_index",
    "dp_optimal",
    "dumps_model",
    "dynamics_of",
    "enumerate_policies",
    "enumerate_stopping_rules",
    "equivalent_rewards",
    "evaluate_exact",
    "geometric_markov",
    "gittins_compare",
    "gittins_index",
    "immediate_payment",
    "index_decomposition",
    "load_model",
    "loads_model",
    "local_times",
    "markov_cumulative_index",
    "model_index",
    "model_index_result",
    "normalize",
    "parametric_stopping_value",
    "policy_block_value",
    "policy_prevailing_index",
    "psp_value_with_policy_indices",
    "random_game",
    "random_markov_bandit",
    "random_profit_bandit",
    "random_tree_bandit",
    "reduce_ccp",
    "reduce_nh",
    "reduce_sp",
    "reduce_tp",
    "reduced_bandit",
    "round_of",
    "rule_count",
    "run_on_atom",
    "run_policy_sampled",
    "save_model",
    "solo_index_enumerate",
    "solo_index_parametric",
    "step",
    "terminal_payout",
    "to_float",
    "trace_times",
    "unroll_markov",
    "validate",
]
