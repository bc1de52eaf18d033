"""Interpretable first-order rule policies for relational MDPs.

The pipeline: an alphabet fixes the ground-atom and variable-atom spaces; a
rule model holds per-action-schema atom-membership logits and samples rule
bodies; fuzzy forward chaining grounds the sampled rules under object
identity and turns their valuations into an action distribution; REINFORCE
with a semantic-constraint penalty trains the logits end to end.
"""

from .logic import (
    Alphabet,
    Atom,
    AtomIndex,
    Constant,
    Domain,
    Predicate,
    Term,
    Variable,
    VocabularyError,
    encode_state,
    enumerate_ground_atoms,
    enumerate_substitutions,
    enumerate_variable_atoms,
    load_alphabet,
    parse_alphabet,
)
from .rules import RuleModel, decode_rule, sample_rule, sigmoid
from .inference import (
    PolicyEvaluator,
    action_distribution,
    build_grounding_matrix,
    combine_rules,
    evaluate_rule,
    rule_valuation,
    tnorm,
    value_lookup,
    weighted_lukasiewicz,
)
from .constraints import (
    Axiom,
    CompiledConstraint,
    compile_constraint,
    compile_constraints,
    load_preset,
    parse_constraints,
    semantic_loss,
)
from .gradients import GradientTape, StepRecord, grad_log_policy, grad_semantic_loss
from .oracle import CrispRule, boolean_eval, exhaustive_rule_search
from .training import (
    TrainerConfig,
    compute_returns,
    default_config,
    evaluate,
    evaluate_traffic,
    random_policy_score,
    random_traffic_score,
    run_episode,
    train,
    train_traffic,
    transfer_traffic_models,
)

__version__ = "0.1.0"
