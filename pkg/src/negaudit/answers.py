"""Record model for protocol items, predictions and verified outputs.

All records are frozen dataclasses. ``from_dict``/``to_dict`` implement the
JSONL wire format; unknown keys survive a read/write cycle via ``extra``.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

MIN_OPTIONS = 3


class Polarity(str, enum.Enum):
    POS = "POS"
    NEG = "NEG"


class ProtocolKind(str, enum.Enum):
    DIRECT_PRESENCE = "DIRECT_PRESENCE"
    REPORT_ABSENCE = "REPORT_ABSENCE"
    POSITIVE_CONTROL = "POSITIVE_CONTROL"
    RETRO_PRESENCE = "RETRO_PRESENCE"
    RETRO_ABSENCE = "RETRO_ABSENCE"


class Reason(str, enum.Enum):
    NOT_NEGATED_PREDICTION = "NOT_NEGATED_PREDICTION"
    NO_NEGATION_CUE = "NO_NEGATION_CUE"
    AMBIGUOUS_OPTIONS = "AMBIGUOUS_OPTIONS"
    NO_COUNTERPART = "NO_COUNTERPART"
    REPAIRED_ABSENCE = "REPAIRED_ABSENCE"
    REPAIRED_PRESENCE = "REPAIRED_PRESENCE"
    Y0_REPLACED = "Y0_REPLACED"
    PASS_THROUGH = "PASS_THROUGH"


TRIGGER_REASONS = frozenset({Reason.REPAIRED_ABSENCE, Reason.REPAIRED_PRESENCE, Reason.Y0_REPLACED})


def _pop_extra(data: Mapping[str, Any], known: Iterable[str]) -> dict[str, Any]:
    known = set(known)
    return {k: v for k, v in data.items() if k not in known}


@dataclass(frozen=True)
class AnswerOption:
    surface_text: str
    concept: str
    polarity: Polarity
    lexicon_pattern_id: str | None = None

    def __post_init__(self) -> None:
        if not self.concept or self.concept != self.concept.strip():
            raise ValueError(f"bad concept {self.concept!r} for option {self.surface_text!r}")
        if self.polarity is Polarity.NEG and self.lexicon_pattern_id is None:
            raise ValueError(f"negated option {self.surface_text!r} has no pattern id")
        if self.polarity is Polarity.POS and self.lexicon_pattern_id is not None:
            raise ValueError(f"positive option {self.surface_text!r} carries a pattern id")

    @property
    def is_negated(self) -> bool:
        return self.polarity is Polarity.NEG

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "text": self.surface_text,
            "concept": self.concept,
            "polarity": self.polarity.value,
        }
        if self.lexicon_pattern_id is not None:
            out["pattern_id"] = self.lexicon_pattern_id
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AnswerOption:
        return _interned_option(data["text"], data["concept"], data["polarity"], data.get("pattern_id"))


@functools.lru_cache(maxsize=65536)
def _interned_option(text: str, concept: str, polarity: str, pattern_id: str | None) -> AnswerOption:
    # options repeat heavily across records and are immutable, so share them
    return AnswerOption(text, concept, Polarity(polarity), pattern_id)


@dataclass(frozen=True)
class ProtocolItem:
    item_id: str
    study_id: str
    image_refs: tuple[str, ...]
    question: str
    options: tuple[AnswerOption, ...]
    gold_index: int
    protocol_kind: ProtocolKind
    target_finding: str
    variant_tag: str = "canonical_no"
    extra: dict[str, Any] = field(default_factory=dict, hash=False)

    _FIELDS = (
        "item_id", "study_id", "image_refs", "question", "options",
        "gold_index", "protocol_kind", "target_finding", "variant_tag",
    )

    @property
    def negated_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.options) if o.is_negated]

    @property
    def gold(self) -> AnswerOption:
        return self.options[self.gold_index]

    def replace(self, **changes: Any) -> ProtocolItem:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "item_id": self.item_id,
            "study_id": self.study_id,
            "image_refs": list(self.image_refs),
            "question": self.question,
            "options": [o.to_dict() for o in self.options],
            "gold_index": self.gold_index,
            "protocol_kind": self.protocol_kind.value,
            "target_finding": self.target_finding,
            "variant_tag": self.variant_tag,
        }
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], lexicon=None) -> ProtocolItem:
        """Parse one protocol record.

        Options given as bare strings are parsed through ``lexicon``
        (extended by default). A string ``answer`` field is resolved to
        ``gold_index`` by exact surface match when no index is present.
        """
        options = []
        for raw in data["options"]:
            if isinstance(raw, str):
                from negaudit.lexicon import EXTENDED, parse_option

                options.append(parse_option(raw, lexicon or EXTENDED))
            else:
                options.append(AnswerOption.from_dict(raw))
        extra = _pop_extra(data, cls._FIELDS)
        if "gold_index" in data:
            gold_index = int(data["gold_index"])
        elif "answer" in data:
            matches = [i for i, o in enumerate(options) if o.surface_text == data["answer"]]
            if len(matches) != 1:
                raise ValueError(
                    f"item {data.get('item_id')!r}: answer {data['answer']!r} matches "
                    f"{len(matches)} options"
                )
            gold_index = matches[0]
            extra.pop("answer")
        else:
            raise ValueError(f"item {data.get('item_id')!r} has neither gold_index nor answer")
        return cls(
            item_id=str(data["item_id"]),
            study_id=str(data["study_id"]),
            image_refs=tuple(data.get("image_refs", ())),
            question=data["question"],
            options=tuple(options),
            gold_index=gold_index,
            protocol_kind=ProtocolKind(data["protocol_kind"]),
            target_finding=data["target_finding"],
            variant_tag=data.get("variant_tag", "canonical_no"),
            extra=extra,
        )


@dataclass(frozen=True)
class PredictionRecord:
    item_id: str
    choice_index: int
    base_confidence: float | None = None
    packet_choice_index: int | None = None
    packet_confidence: float | None = None
    option_logprobs: tuple[float, ...] | None = None
    extra: dict[str, Any] = field(default_factory=dict, hash=False)

    _FIELDS = (
        "item_id", "choice_index", "base_confidence", "packet_choice_index",
        "packet_confidence", "option_logprobs",
    )

    def __post_init__(self) -> None:
        for name in ("base_confidence", "packet_confidence"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{self.item_id}: {name}={value} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"item_id": self.item_id, "choice_index": self.choice_index}
        for name in self._FIELDS[2:]:
            value = getattr(self, name)
            if value is not None:
                out[name] = list(value) if name == "option_logprobs" else value
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PredictionRecord:
        logprobs = data.get("option_logprobs")
        return cls(
            item_id=str(data["item_id"]),
            choice_index=int(data["choice_index"]),
            base_confidence=data.get("base_confidence"),
            packet_choice_index=data.get("packet_choice_index"),
            packet_confidence=data.get("packet_confidence"),
            option_logprobs=None if logprobs is None else tuple(float(x) for x in logprobs),
            extra=_pop_extra(data, cls._FIELDS),
        )


@dataclass(frozen=True)
class VerifiedPrediction:
    item_id: str
    base_index: int
    final_index: int
    triggered: bool
    reason: Reason
    note: str | None = None

    def __post_init__(self) -> None:
        if self.triggered != (self.reason in TRIGGER_REASONS):
            raise ValueError(f"{self.item_id}: triggered={self.triggered} with reason {self.reason}")
        if not self.triggered and self.final_index != self.base_index:
            raise ValueError(f"{self.item_id}: untriggered record changed its choice")

    def as_prediction(self) -> PredictionRecord:
        """The verified choice as a plain prediction (for re-scoring or re-verifying)."""
        return PredictionRecord(item_id=self.item_id, choice_index=self.final_index)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "item_id": self.item_id,
            "base_index": self.base_index,
            "final_index": self.final_index,
            "triggered": self.triggered,
            "reason": self.reason.value,
        }
        if self.note is not None:
            out["note"] = self.note
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> VerifiedPrediction:
        return cls(
            item_id=str(data["item_id"]),
            base_index=int(data["base_index"]),
            final_index=int(data["final_index"]),
            triggered=bool(data["triggered"]),
            reason=Reason(data["reason"]),
            note=data.get("note"),
        )


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    item_id: str
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "errors": [dataclasses.asdict(v) for v in self.errors],
            "warnings": [dataclasses.asdict(v) for v in self.warnings],
        }


def _item_violations(item: ProtocolItem) -> tuple[list[Violation], list[Violation]]:
    errors: list[Violation] = []
    warnings: list[Violation] = []

    def err(code: str, message: str) -> None:
        errors.append(Violation(item.item_id, code, message))

    n = len(item.options)
    if n < MIN_OPTIONS:
        err("too_few_options", f"{n} options, need at least {MIN_OPTIONS}")
    if not 0 <= item.gold_index < n:
        err("gold_out_of_range", f"gold_index {item.gold_index} not in [0, {n})")

    negated = item.negated_indices
    if item.protocol_kind is ProtocolKind.POSITIVE_CONTROL:
        if negated:
            err("control_has_negation", "control item contains negated option")
    else:
        if len(negated) != 1:
            err("negation_count", f"expected exactly one negated option, found {len(negated)}")
        elif item.options[negated[0]].concept != item.target_finding:
            err(
                "negation_concept_mismatch",
                f"negated concept {item.options[negated[0]].concept!r} "
                f"!= target {item.target_finding!r}",
            )

    positive = Counter(o.concept for o in item.options if not o.is_negated)
    for concept, count in sorted(positive.items()):
        if count > 1:
            warnings.append(
                Violation(item.item_id, "duplicate_positive_concept", f"{count} positive {concept!r} options")
            )
    return errors, warnings


def validate_protocol(items: Sequence[ProtocolItem]) -> ValidationReport:
    """Check structural invariants of a protocol; never mutates ``items``."""
    errors: list[Violation] = []
    warnings: list[Violation] = []
    seen: set[str] = set()
    for item in items:
        if item.item_id in seen:
            errors.append(Violation(item.item_id, "duplicate_item_id", "item_id appears more than once"))
        seen.add(item.item_id)
        e, w = _item_violations(item)
        errors.extend(e)
        warnings.extend(w)
    return ValidationReport(tuple(errors), tuple(warnings))


# -- joining ------------------------------------------------------------------


class JoinError(ValueError):
    """Hard join failure: duplicate predictions or unusable records."""


@dataclass(frozen=True)
class JoinResult:
    pairs: tuple[tuple[ProtocolItem, PredictionRecord], ...]
    missing: tuple[str, ...] = ()
    errors: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_for_errors(self) -> None:
        if self.errors:
            detail = "; ".join(f"{v.item_id}: {v.message}" for v in self.errors[:5])
            raise JoinError(f"{len(self.errors)} join error(s): {detail}")


def join_predictions(
    items: Sequence[ProtocolItem], predictions: Sequence[PredictionRecord]
) -> JoinResult:
    """Pair each item with its prediction, in protocol order.

    Duplicate predictions for one item raise :class:`JoinError`. Orphan
    predictions and out-of-range choices are reported as errors; items
    without a prediction are listed in ``missing``.
    """
    by_id: dict[str, PredictionRecord] = {}
    for pred in predictions:
        if pred.item_id in by_id:
            raise JoinError(f"duplicate prediction for item_id {pred.item_id!r}")
        by_id[pred.item_id] = pred

    known = {item.item_id for item in items}
    errors = [
        Violation(p.item_id, "orphan_prediction", "prediction references unknown item_id")
        for p in predictions
        if p.item_id not in known
    ]
    pairs = []
    missing = []
    for item in items:
        pred = by_id.get(item.item_id)
        if pred is None:
            missing.append(item.item_id)
            continue
        n = len(item.options)
        if not 0 <= pred.choice_index < n:
            errors.append(Violation(item.item_id, "choice_out_of_range", f"choice_index {pred.choice_index} not in [0, {n})"))
            continue
        if pred.option_logprobs is not None and len(pred.option_logprobs) != n:
            errors.append(Violation(item.item_id, "logprob_length", f"{len(pred.option_logprobs)} logprobs for {n} options"))
            continue
        pairs.append((item, pred))
    return JoinResult(tuple(pairs), tuple(missing), tuple(errors))
