"""Dialogue state tracking evaluation: JGA, slot accuracy, AGA and flexible goal accuracy."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    DSTEvalError,
    EmptyField,
    InputMismatch,
    OntologyEmpty,
    ParseError,
    SchemaError,
    SlotAccuracyRange,
)
from .metrics import (  # noqa: E402
    UNBOUNDED,
    DatasetScores,
    MetricConfig,
    TurnClass,
    TurnKind,
    aga_turn,
    aga_turn_jaccard,
    classify_turns,
    evaluate_dataset,
    exact_match,
    fga_conversation,
    fga_weight,
    lambda_from_forgetting,
    local_match,
    slot_accuracy_turn,
    turn_delta,
)
from .model import (  # noqa: E402
    BeliefState,
    Conversation,
    DomainSlot,
    NormalizationPolicy,
    Ontology,
    Triplet,
    Turn,
    belief_state,
    normalize_triplet,
    project_pairs,
    set_difference,
)
