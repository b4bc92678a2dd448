"""Polarity audit toolkit for contrastive multiple-choice chest X-ray VQA.

Builds protocols with exactly one negated option, detects and repairs
negated-option selections in recorded predictions, and scores the result
with resampling-based uncertainty.
"""

__version__ = "0.1.0"

from negaudit.answers import (
    AnswerOption,
    JoinError,
    Polarity,
    PredictionRecord,
    ProtocolItem,
    ProtocolKind,
    Reason,
    VerifiedPrediction,
    join_predictions,
    validate_protocol,
)
from negaudit.lexicon import (
    EXTENDED,
    ORIGINAL,
    NegationLexicon,
    PolarityClass,
    classify_question,
    find_positive_counterpart,
    parse_option,
)
from negaudit.verifier import SlotMode, VerifierConfig, batch_verify, qccv_verify, y0_fallback

__all__ = [
    "AnswerOption",
    "EXTENDED",
    "JoinError",
    "NegationLexicon",
    "ORIGINAL",
    "Polarity",
    "PolarityClass",
    "PredictionRecord",
    "ProtocolItem",
    "ProtocolKind",
    "Reason",
    "SlotMode",
    "VerifiedPrediction",
    "VerifierConfig",
    "batch_verify",
    "classify_question",
    "find_positive_counterpart",
    "join_predictions",
    "parse_option",
    "qccv_verify",
    "validate_protocol",
    "y0_fallback",
]
