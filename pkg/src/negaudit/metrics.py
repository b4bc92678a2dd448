"""Exact-match accuracy and polarity-error counts, diffs, and log-prob gaps.

Counts are computed from the polarity stored on each protocol option, so a
verifier running a narrower lexicon cannot hide errors from the scorer.
Percentages are rounded only for presentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from negaudit.answers import PredictionRecord, ProtocolItem, VerifiedPrediction, join_predictions
from negaudit.lexicon import EXTENDED, NegationLexicon, PolarityClass, classify_question, find_positive_counterpart
from negaudit.rounding import percent


@dataclass
class MetricsReport:
    n: int = 0
    correct: int = 0
    contradictions: int = 0
    presence_reversals: int = 0
    wrong_with_negation: int = 0
    repairable_reversals: int = 0
    per_finding: dict[str, MetricsReport] = field(default_factory=dict)
    question_polarity_split: dict[str, MetricsReport] = field(default_factory=dict)

    @property
    def accuracy_pct(self) -> float | None:
        return percent(self.correct, self.n)

    @property
    def wrong_other(self) -> int:
        return self.n - self.correct - self.wrong_with_negation

    @property
    def polarity_errors(self) -> int:
        return self.contradictions + self.presence_reversals

    def _add(self, correct: bool, neg_chosen: bool, repairable: bool, polarity: PolarityClass) -> None:
        self.n += 1
        self.correct += correct
        if neg_chosen:
            self.contradictions += polarity is PolarityClass.ABSENCE
            self.presence_reversals += polarity is PolarityClass.PRESENCE
            if not correct:
                self.wrong_with_negation += 1
                self.repairable_reversals += repairable

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "n": self.n,
            "correct": self.correct,
            "accuracy_pct": self.accuracy_pct,
            "contradictions": self.contradictions,
            "presence_reversals": self.presence_reversals,
            "wrong_with_negation": self.wrong_with_negation,
            "repairable_reversals": self.repairable_reversals,
            "wrong_other": self.wrong_other,
        }
        if self.per_finding:
            out["per_finding"] = {k: v.to_dict() for k, v in sorted(self.per_finding.items())}
        if self.question_polarity_split:
            out["question_polarity_split"] = {
                k: v.to_dict() for k, v in sorted(self.question_polarity_split.items())
            }
        return out


def _flags(item: ProtocolItem, choice: int, lexicon: NegationLexicon):
    chosen = item.options[choice]
    correct = choice == item.gold_index
    repairable = False
    if chosen.is_negated and not correct:
        repairable = find_positive_counterpart(item.options, choice) == item.gold_index
    return correct, chosen.is_negated, repairable, classify_question(item.question, lexicon)


def score_pairs(
    pairs: Iterable[tuple[ProtocolItem, int]], lexicon: NegationLexicon = EXTENDED
) -> MetricsReport:
    report = MetricsReport()
    for item, choice in pairs:
        flags = _flags(item, choice, lexicon)
        report._add(*flags)
        report.per_finding.setdefault(item.target_finding, MetricsReport())._add(*flags)
        report.question_polarity_split.setdefault(flags[3].value, MetricsReport())._add(*flags)
    return report


def score(
    items: Sequence[ProtocolItem],
    predictions: Sequence[PredictionRecord],
    lexicon: NegationLexicon = EXTENDED,
) -> MetricsReport:
    joined = join_predictions(items, predictions)
    joined.raise_for_errors()
    return score_pairs(((item, pred.choice_index) for item, pred in joined.pairs), lexicon)


@dataclass
class DiffReport:
    n: int
    changed: int
    improved: int
    worsened: int
    changed_still_wrong: int
    triggered: int
    base_correct: int
    verified_correct: int
    worsened_ids: list[str] = field(default_factory=list)

    @property
    def coverage_pct(self) -> float | None:
        return percent(self.triggered, self.n)

    @property
    def delta_acc_pp(self) -> float | None:
        return percent(self.verified_correct - self.base_correct, self.n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "changed": self.changed,
            "improved": self.improved,
            "worsened": self.worsened,
            "changed_still_wrong": self.changed_still_wrong,
            "triggered": self.triggered,
            "coverage_pct": self.coverage_pct,
            "base_correct": self.base_correct,
            "verified_correct": self.verified_correct,
            "delta_acc_pp": self.delta_acc_pp,
            "worsened_ids": self.worsened_ids,
        }


def diff(
    items: Sequence[ProtocolItem],
    base: Sequence[PredictionRecord],
    verified: Sequence[VerifiedPrediction | PredictionRecord],
) -> DiffReport:
    """Compare two prediction sets over the same items."""
    gold = {it.item_id: it.gold_index for it in items}
    base_by_id = {p.item_id: p.choice_index for p in base}
    final_by_id: dict[str, tuple[int, bool]] = {}
    for v in verified:
        if isinstance(v, VerifiedPrediction):
            final_by_id[v.item_id] = (v.final_index, v.triggered)
        else:
            final_by_id[v.item_id] = (v.choice_index, v.choice_index != base_by_id.get(v.item_id))
    if set(base_by_id) != set(final_by_id):
        raise ValueError(
            f"diff needs identical item sets: {len(set(base_by_id) ^ set(final_by_id))} ids differ"
        )
    unknown = set(base_by_id) - set(gold)
    if unknown:
        raise ValueError(f"{len(unknown)} predicted item ids are not in the protocol")

    report = DiffReport(0, 0, 0, 0, 0, 0, 0, 0)
    for item in items:
        if item.item_id not in base_by_id:
            continue
        b = base_by_id[item.item_id]
        f, triggered = final_by_id[item.item_id]
        b_ok, f_ok = b == item.gold_index, f == item.gold_index
        report.n += 1
        report.triggered += triggered
        report.base_correct += b_ok
        report.verified_correct += f_ok
        if f != b:
            report.changed += 1
            if f_ok:
                report.improved += 1
            elif b_ok:
                report.worsened += 1
                report.worsened_ids.append(item.item_id)
            else:
                report.changed_still_wrong += 1
    return report


# -- log-probability gap -------------------------------------------------------


@dataclass
class GapSummary:
    gaps: dict[str, float]
    skipped_missing_logprobs: int
    skipped_no_pair: int

    @property
    def n(self) -> int:
        return len(self.gaps)

    @property
    def mean(self) -> float | None:
        return float(np.mean(list(self.gaps.values()))) if self.gaps else None

    def quantiles(self, qs: Sequence[float] = (0.05, 0.25, 0.5, 0.75, 0.95)) -> dict[str, float]:
        if not self.gaps:
            return {}
        values = np.quantile(list(self.gaps.values()), qs)
        return {f"q{int(round(q * 100)):02d}": float(v) for q, v in zip(qs, values)}

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "mean_nats": None if self.mean is None else round(self.mean, 6),
            "quantiles": self.quantiles(),
            "skipped_missing_logprobs": self.skipped_missing_logprobs,
            "skipped_no_pair": self.skipped_no_pair,
        }


def logprob_gap(
    items: Sequence[ProtocolItem],
    predictions: Sequence[PredictionRecord],
    subset: Iterable[str] | None = None,
) -> GapSummary:
    """Per-item ``logprob(negated) - logprob(positive counterpart)`` in nats."""
    wanted = None if subset is None else set(subset)
    preds = {p.item_id: p for p in predictions}
    gaps: dict[str, float] = {}
    missing = no_pair = 0
    for item in items:
        if wanted is not None and item.item_id not in wanted:
            continue
        pred = preds.get(item.item_id)
        if pred is None:
            continue
        negated = item.negated_indices
        counterpart = find_positive_counterpart(item.options, negated[0]) if len(negated) == 1 else None
        if counterpart is None:
            no_pair += 1
            continue
        if pred.option_logprobs is None:
            missing += 1
            continue
        gaps[item.item_id] = pred.option_logprobs[negated[0]] - pred.option_logprobs[counterpart]
    return GapSummary(gaps, missing, no_pair)


def safe_subset_ids(items: Sequence[ProtocolItem], verified: Sequence[VerifiedPrediction]) -> list[str]:
    """Items where the verifier fired and landed on gold."""
    gold = {it.item_id: it.gold_index for it in items}
    return [v.item_id for v in verified if v.triggered and v.final_index == gold.get(v.item_id)]


# -- presentation ----------------------------------------------------------------


@dataclass
class ComparisonRow:
    label: str
    n: int
    base_acc: float | None
    verified_acc: float | None
    delta_pp: float | None
    errors_before: int
    errors_after: int

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def comparison_row(label: str, before: MetricsReport, after: MetricsReport) -> ComparisonRow:
    if before.n != after.n:
        raise ValueError(f"{label}: base n={before.n} but verified n={after.n}")
    return ComparisonRow(
        label=label,
        n=before.n,
        base_acc=before.accuracy_pct,
        verified_acc=after.accuracy_pct,
        delta_pp=percent(after.correct - before.correct, before.n),
        errors_before=before.polarity_errors,
        errors_after=after.polarity_errors,
    )


def _fmt(value: float | None, signed: bool = False) -> str:
    if value is None:
        return "n/a"
    return f"{value:+.2f}" if signed else f"{value:.2f}"


def render_markdown(rows: Sequence[ComparisonRow]) -> str:
    lines = [
        "| Run | n | Base acc | Verified acc | Δpp | Errors before→after |",
        "|---|---:|---:|---:|---:|---:|",
    ]
    for r in rows:
        lines.append(
            f"| {r.label} | {r.n} | {_fmt(r.base_acc)} | {_fmt(r.verified_acc)} | "
            f"{_fmt(r.delta_pp, signed=True)} | {r.errors_before} → {r.errors_after} |"
        )
    return "\n".join(lines) + "\n"


__all__ = [
    "ComparisonRow",
    "DiffReport",
    "GapSummary",
    "MetricsReport",
    "comparison_row",
    "diff",
    "logprob_gap",
    "render_markdown",
    "safe_subset_ids",
    "score",
    "score_pairs",
]
