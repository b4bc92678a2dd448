"""Deterministic post-hoc repair of negated-option selections.

A prediction is rewritten only when four conditions hold, checked in order:

1. exactly one option parses as negated under the configured lexicon;
2. the prediction selects that option;
3. the question polarity classifies as ABSENCE or PRESENCE;
4. a remap target exists without concept ambiguity.

Anything else passes through unchanged with an explicit reason code. The
optional confidence fallback (Y0) is an independent overlay that runs first
when enabled.
"""

from __future__ import annotations

import dataclasses
import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

from negaudit.answers import (
    Polarity,
    PredictionRecord,
    ProtocolItem,
    Reason,
    VerifiedPrediction,
    join_predictions,
)
from negaudit.lexicon import (
    EXTENDED,
    NegationLexicon,
    PolarityClass,
    classify_question,
    find_positive_counterpart,
    parse_options,
)
from negaudit.rounding import percent

Y0_CONFIDENCE_CEILING = 0.80
Y0_MARGIN = 0.03
_EPS = 1e-12

ORIGINAL_LEXICON_NOTE = (
    "original lexicon: absence-side repair targets the first positive slot, so a paraphrase "
    "that still parses as negated (e.g. 'no evidence of X' read as 'no {X}') is repaired on "
    "absence items, while presence-side repair needs a same-concept counterpart and misses it; "
    "paraphrases that do not parse as negated at all ('absence of X', 'X is not present', "
    "'clear of X') are never repaired. Published absence-side coverage of 'clear of X' under "
    "the original trigger is not reproduced by this rule."
)


class SlotMode(str, enum.Enum):
    SLOT0 = "SLOT0"
    SLOT_AGNOSTIC = "SLOT_AGNOSTIC"


@dataclass(frozen=True)
class VerifierConfig:
    lexicon: NegationLexicon = EXTENDED
    slot_mode: SlotMode = SlotMode.SLOT0
    y0_enabled: bool = False
    y0_confidence_ceiling: float = Y0_CONFIDENCE_CEILING
    y0_margin: float = Y0_MARGIN

    def to_dict(self) -> dict[str, Any]:
        return {
            "lexicon": self.lexicon.to_dict(),
            "slot_mode": self.slot_mode.value,
            "y0_enabled": self.y0_enabled,
            "y0_confidence_ceiling": self.y0_confidence_ceiling,
            "y0_margin": self.y0_margin,
        }


def _first_positive_slot(options) -> int | None:
    for i, o in enumerate(options):
        if o.polarity is Polarity.POS:
            return i
    return None


def qccv_verify(item: ProtocolItem, pred: PredictionRecord, cfg: VerifierConfig) -> VerifiedPrediction:
    base = pred.choice_index
    if not 0 <= base < len(item.options):
        raise ValueError(f"{item.item_id}: choice_index {base} out of range")

    def passthrough(reason: Reason) -> VerifiedPrediction:
        return VerifiedPrediction(item.item_id, base, base, False, reason)

    parsed = parse_options([o.surface_text for o in item.options], cfg.lexicon)
    negated = [i for i, o in enumerate(parsed) if o.is_negated]
    if len(negated) != 1:
        return passthrough(Reason.AMBIGUOUS_OPTIONS)
    neg = negated[0]
    if base != neg:
        return passthrough(Reason.NOT_NEGATED_PREDICTION)
    polarity = classify_question(item.question, cfg.lexicon)
    if polarity is PolarityClass.UNKNOWN:
        return passthrough(Reason.NO_NEGATION_CUE)

    if polarity is PolarityClass.ABSENCE:
        reason = Reason.REPAIRED_ABSENCE
        if cfg.slot_mode is SlotMode.SLOT0:
            target = _first_positive_slot(parsed)
        else:
            target = find_positive_counterpart(parsed, neg)
    else:
        reason = Reason.REPAIRED_PRESENCE
        target = find_positive_counterpart(parsed, neg)
    if target is None:
        return passthrough(Reason.NO_COUNTERPART)
    return VerifiedPrediction(item.item_id, base, target, True, reason)


def y0_fallback(item: ProtocolItem, pred: PredictionRecord, cfg: VerifierConfig) -> VerifiedPrediction:
    """Swap in the packet choice when base confidence is low and the packet is more confident."""
    if not cfg.y0_enabled:
        raise ValueError("y0_fallback called with y0 disabled")
    base = pred.choice_index

    def passthrough(note: str | None = None) -> VerifiedPrediction:
        return VerifiedPrediction(item.item_id, base, base, False, Reason.PASS_THROUGH, note)

    if pred.base_confidence is None or pred.packet_confidence is None or pred.packet_choice_index is None:
        return passthrough("y0: missing confidence fields")
    if not 0 <= pred.packet_choice_index < len(item.options):
        return passthrough("y0: packet choice out of range")
    if pred.base_confidence >= cfg.y0_confidence_ceiling:
        return passthrough()
    if pred.packet_confidence - pred.base_confidence < cfg.y0_margin - _EPS:
        return passthrough()
    if pred.packet_choice_index == base:
        return passthrough()
    return VerifiedPrediction(item.item_id, base, pred.packet_choice_index, True, Reason.Y0_REPLACED)


def verify_one(item: ProtocolItem, pred: PredictionRecord, cfg: VerifierConfig) -> VerifiedPrediction:
    """Y0 (when enabled) then QCCV, so polarity repair has the last word."""
    if not cfg.y0_enabled:
        return qccv_verify(item, pred, cfg)
    y = y0_fallback(item, pred, cfg)
    staged = dataclasses.replace(pred, choice_index=y.final_index) if y.triggered else pred
    q = qccv_verify(item, staged, cfg)
    if q.triggered:
        return VerifiedPrediction(item.item_id, pred.choice_index, q.final_index, True, q.reason, y.note)
    if y.triggered:
        return y
    return VerifiedPrediction(item.item_id, pred.choice_index, pred.choice_index, False, q.reason, y.note)


@dataclass
class TriggerSummary:
    n: int
    triggered: int
    reason_counts: dict[str, int]
    warnings: int = 0
    missing_predictions: list[str] = field(default_factory=list)
    config_echo: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def coverage_pct(self) -> float | None:
        return percent(self.triggered, self.n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "triggered": self.triggered,
            "coverage_pct": self.coverage_pct,
            "reason_counts": self.reason_counts,
            "warnings": self.warnings,
            "missing_predictions": self.missing_predictions,
            "config_echo": self.config_echo,
            "notes": self.notes,
        }


def summarize(results: Sequence[VerifiedPrediction], cfg: VerifierConfig) -> TriggerSummary:
    counts = Counter(r.reason for r in results)
    notes = [ORIGINAL_LEXICON_NOTE] if cfg.lexicon.name == "original" else []
    return TriggerSummary(
        n=len(results),
        triggered=sum(r.triggered for r in results),
        reason_counts={reason.value: counts[reason] for reason in Reason if counts[reason]},
        warnings=sum(1 for r in results if r.note and "missing" in r.note),
        config_echo=cfg.to_dict(),
        notes=notes,
    )


def batch_verify(
    items: Sequence[ProtocolItem], predictions: Sequence[PredictionRecord], cfg: VerifierConfig
) -> tuple[list[VerifiedPrediction], TriggerSummary]:
    joined = join_predictions(items, predictions)
    joined.raise_for_errors()
    results = [verify_one(item, pred, cfg) for item, pred in joined.pairs]
    summary = summarize(results, cfg)
    summary.missing_predictions = list(joined.missing)
    return results, summary
