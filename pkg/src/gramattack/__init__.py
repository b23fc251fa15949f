"""Grammatical-error perturbation and black-box adversarial attack engine."""

from .attack import (
    AttackConfig,
    AttackResult,
    beam_attack,
    budget,
    genetic_attack,
    greedy_attack,
    run_campaign,
    token_importance,
)
from .confusion import (
    EPSILON,
    ConfusionSet,
    ErrorDistribution,
    ErrorType,
    candidates,
    default_sets,
    estimate,
    sample_error_type,
)
from .errors import OracleError, ValidationError
from .morphology import (
    InflectionLexicon,
    default_lexicon,
    noun_number_forms,
    sva_forms,
    synonyms,
    vform_forms,
    worder_swap_target,
)
from .oracle import (
    BigramMaskFiller,
    CachingOracle,
    Oracle,
    RemoteOracle,
    ToyClassifier,
    train_toy_classifier,
)
from .perturb import (
    Operation,
    OperationSet,
    OpKind,
    apply,
    apply_ops,
    build_operation_sets,
    build_probe_dataset,
    probabilistic_transform,
)
from .textmodel import (
    MinimalEditPair,
    TaggedSentence,
    TaskInstance,
    Token,
    load_dataset,
    load_minimal_pairs,
    naive_pos_tag,
)

__version__ = "0.1.0"
