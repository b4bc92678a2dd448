"""Additive concept/polarity score model and checks on its argmax predictions.

Each option scores ``u[concept] + v[(concept, polarity)]``; the model answers
with the argmax, ties going to the lowest index. Generated instances are
ordinary protocol items and predictions, so they can be fed to the verifier
and scorer unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from negaudit.answers import AnswerOption, Polarity, PredictionRecord, ProtocolItem, ProtocolKind
from negaudit.builder import PRESENCE_QUESTION
from negaudit.lexicon import find_positive_counterpart, render_negated, render_positive
from negaudit.resampling import iteration_rng
from negaudit.verifier import VerifierConfig, batch_verify

TIE_BREAK_RULE = "lowest index wins among maximal scores"

CONCEPT_POOL = (
    "enlarged cardiomediastinum",
    "cardiomegaly",
    "lung opacity",
    "lung lesion",
    "edema",
    "consolidation",
    "pneumonia",
    "atelectasis",
    "pneumothorax",
    "pleural effusion",
    "pleural other",
    "fracture",
    "support devices",
)


@dataclass(frozen=True)
class ScoreModel:
    u: dict[str, float] = field(hash=False)
    v: dict[tuple[str, Polarity], float] = field(hash=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "u": dict(self.u),
            "v": {f"{c}|{p.value}": val for (c, p), val in self.v.items()},
        }


def score_option(model: ScoreModel, option: AnswerOption) -> float:
    concept = option.concept
    if concept not in model.u:
        raise KeyError(f"score model has no concept support for {concept!r}")
    key = (concept, option.polarity)
    if key not in model.v:
        raise KeyError(f"score model has no {option.polarity.value} residual for {concept!r}")
    return model.u[concept] + model.v[key]


def option_scores(model: ScoreModel, item: ProtocolItem) -> list[float]:
    return [score_option(model, o) for o in item.options]


def exact_scores(model: ScoreModel, item: ProtocolItem) -> list[Fraction]:
    """Option scores as exact rationals, so float rounding never manufactures a tie."""
    out = []
    for o in item.options:
        score_option(model, o)  # entry checks
        out.append(Fraction(model.u[o.concept]) + Fraction(model.v[(o.concept, o.polarity)]))
    return out


def predict(model: ScoreModel, item: ProtocolItem) -> int:
    scores = exact_scores(model, item)
    return scores.index(max(scores))


def _gold_pair(item: ProtocolItem) -> tuple[int, int]:
    """(positive counterpart, negated) indices; the item must lie in S_gold+."""
    negated = item.negated_indices
    if len(negated) != 1:
        raise ValueError(f"{item.item_id}: expected exactly one negated option, found {len(negated)}")
    pos = find_positive_counterpart(item.options, negated[0])
    if pos is None or pos != item.gold_index:
        raise ValueError(f"{item.item_id}: gold is not the unique positive counterpart of the negated option")
    if len(item.options) < 3:
        raise ValueError(f"{item.item_id}: needs at least one distractor beside the concept pair")
    return pos, negated[0]


@dataclass(frozen=True)
class PropositionCheck:
    assumptions_hold: bool
    conclusion_holds: bool

    @property
    def counterexample(self) -> bool:
        return self.assumptions_hold and not self.conclusion_holds


def check_proposition_1(model: ScoreModel, item: ProtocolItem) -> PropositionCheck:
    """Pair outranks every distractor and v(neg) > v(pos)  =>  prediction is the negated option."""
    pos, neg = _gold_pair(item)
    scores = exact_scores(model, item)
    distractor_best = max(s for i, s in enumerate(scores) if i not in (pos, neg))
    concept = item.options[pos].concept
    pair_wins = max(scores[pos], scores[neg]) > distractor_best
    bias = model.v[(concept, Polarity.NEG)] > model.v[(concept, Polarity.POS)]
    return PropositionCheck(pair_wins and bias, predict(model, item) == neg)


@dataclass(frozen=True)
class BiconditionalCheck:
    predicts_negated: bool
    same_concept_flipped_polarity: bool

    @property
    def holds(self) -> bool:
        return self.predicts_negated == self.same_concept_flipped_polarity

    def __bool__(self) -> bool:
        return self.holds


def check_proposition_2(model: ScoreModel, item: ProtocolItem) -> BiconditionalCheck:
    """Predicting the negated option <=> same concept as gold with the opposite polarity."""
    _, neg = _gold_pair(item)
    gold = item.gold
    same_concept_neg = [o for o in item.options if o.concept == gold.concept and o.is_negated]
    if len(same_concept_neg) != 1:
        raise ValueError(f"{item.item_id}: negated option is not unique for the gold concept")
    chosen = item.options[predict(model, item)]
    return BiconditionalCheck(
        predicts_negated=chosen is item.options[neg],
        same_concept_flipped_polarity=chosen.concept == gold.concept and chosen.polarity != gold.polarity,
    )


# -- instance generation ------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    model: ScoreModel
    item: ProtocolItem
    prediction: PredictionRecord


def _log_softmax(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    m = s.max()
    return s - (m + np.log(np.exp(s - m).sum()))


def generate_instances(
    seed: int,
    n: int,
    u_range: tuple[float, float] = (0.0, 5.0),
    v_pos_range: tuple[float, float] = (0.0, 2.0),
    v_neg_range: tuple[float, float] = (0.0, 2.0),
    distractor_u_range: tuple[float, float] | None = None,
    n_options: tuple[int, int] = (3, 5),
) -> list[Instance]:
    """Random S_gold+ items with uniformly drawn score models.

    Instance ``i`` uses a generator seeded by ``(seed, i)``. The positive
    counterpart always sits before its negated form, so exact polarity ties
    resolve to the positive option.
    """
    for lo, hi in (u_range, v_pos_range, v_neg_range, distractor_u_range or u_range):
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueError(f"bad range ({lo}, {hi})")
    lo_k, hi_k = n_options
    if not 3 <= lo_k <= hi_k <= len(CONCEPT_POOL) + 1:
        raise ValueError(f"bad option count range {n_options}")

    out = []
    for i in range(n):
        rng = iteration_rng(seed, i)
        k = int(rng.integers(lo_k, hi_k + 1))
        picks = rng.choice(len(CONCEPT_POOL), size=k - 1, replace=False)
        concepts = [CONCEPT_POOL[j] for j in picks]
        target, distractors = concepts[0], concepts[1:]

        u = {target: float(rng.uniform(*u_range))}
        for c in distractors:
            u[c] = float(rng.uniform(*(distractor_u_range or u_range)))
        v = {}
        for c in concepts:
            v[(c, Polarity.POS)] = float(rng.uniform(*v_pos_range))
            v[(c, Polarity.NEG)] = float(rng.uniform(*v_neg_range))
        model = ScoreModel(u, v)

        pos_slot, neg_slot = sorted(int(x) for x in rng.choice(k, size=2, replace=False))
        rest = iter(distractors)
        options = []
        for slot in range(k):
            if slot == pos_slot:
                options.append(AnswerOption(render_positive(target), target, Polarity.POS))
            elif slot == neg_slot:
                options.append(
                    AnswerOption(render_negated(target, "canonical_no"), target, Polarity.NEG, "canonical_no")
                )
            else:
                c = next(rest)
                options.append(AnswerOption(render_positive(c), c, Polarity.POS))

        item_id = f"sim-{seed}-{i:06d}"
        item = ProtocolItem(
            item_id=item_id,
            study_id=item_id,
            image_refs=(),
            question=PRESENCE_QUESTION,
            options=tuple(options),
            gold_index=pos_slot,
            protocol_kind=ProtocolKind.DIRECT_PRESENCE,
            target_finding=target,
            variant_tag="simulated",
        )
        scores = option_scores(model, item)
        pred = PredictionRecord(
            item_id=item_id,
            choice_index=predict(model, item),
            option_logprobs=tuple(float(x) for x in _log_softmax(scores)),
        )
        out.append(Instance(model, item, pred))
    return out


# -- safe-subset identity ----------------------------------------------------------


@dataclass
class SafeSubsetReport:
    n: int = 0
    triggered: int = 0
    base_correct: int = 0
    verified_correct: int = 0
    help: int = 0
    harm_ids: list[str] = field(default_factory=list)
    delta_acc: Fraction = Fraction(0)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "triggered": self.triggered,
            "base_correct": self.base_correct,
            "verified_correct": self.verified_correct,
            "help": self.help,
            "harm": len(self.harm_ids),
            "delta_acc": str(self.delta_acc),
            "ok": self.ok,
            "failures": self.failures[:20],
        }


def check_safe_subset(instances: Sequence[Instance], cfg: VerifierConfig = VerifierConfig()) -> SafeSubsetReport:
    """Verify the instances and check the four repair identities item by item.

    (a) triggered => final == gold; (b) not triggered => unchanged;
    (c) no item goes from right to wrong; (d) the accuracy change equals
    ``|triggered and base wrong| / n`` exactly.
    """
    report = SafeSubsetReport(n=len(instances))
    if not instances:
        return report
    items = [inst.item for inst in instances]
    results, _ = batch_verify(items, [inst.prediction for inst in instances], cfg)
    triggered_wrong = 0
    for item, res in zip(items, results):
        gold = item.gold_index
        base_ok, final_ok = res.base_index == gold, res.final_index == gold
        report.triggered += res.triggered
        report.base_correct += base_ok
        report.verified_correct += final_ok
        if res.triggered and not final_ok:
            report.failures.append(f"{item.item_id}: triggered but final {res.final_index} != gold {gold}")
        if not res.triggered and res.final_index != res.base_index:
            report.failures.append(f"{item.item_id}: untriggered prediction changed")
        if base_ok and not final_ok:
            report.harm_ids.append(item.item_id)
            report.failures.append(f"{item.item_id}: harmed by verification")
        if not base_ok and final_ok:
            report.help += 1
        if res.triggered and not base_ok:
            triggered_wrong += 1
    report.delta_acc = Fraction(report.verified_correct - report.base_correct, report.n)
    if report.delta_acc != Fraction(triggered_wrong, report.n):
        report.failures.append(f"delta acc {report.delta_acc} != triggered-and-wrong {triggered_wrong}/{report.n}")
    if report.delta_acc != Fraction(report.help - len(report.harm_ids), report.n):
        report.failures.append("delta acc differs from (help - harm) / n")
    return report


@dataclass
class PropositionSuiteReport:
    n: int
    prop1_assumptions_held: int
    prop1_counterexamples: list[str]
    prop2_counterexamples: list[str]
    safe_subset: SafeSubsetReport

    @property
    def ok(self) -> bool:
        return not self.prop1_counterexamples and not self.prop2_counterexamples and self.safe_subset.ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "prop1_assumptions_held": self.prop1_assumptions_held,
            "prop1_counterexamples": len(self.prop1_counterexamples),
            "prop2_counterexamples": len(self.prop2_counterexamples),
            "safe_subset": self.safe_subset.to_dict(),
            "tie_break": TIE_BREAK_RULE,
            "ok": self.ok,
        }


def run_proposition_suite(instances: Sequence[Instance], cfg: VerifierConfig = VerifierConfig()) -> PropositionSuiteReport:
    held = 0
    p1_bad, p2_bad = [], []
    for inst in instances:
        c1 = check_proposition_1(inst.model, inst.item)
        held += c1.assumptions_hold
        if c1.counterexample:
            p1_bad.append(inst.item.item_id)
        if not check_proposition_2(inst.model, inst.item):
            p2_bad.append(inst.item.item_id)
    return PropositionSuiteReport(len(instances), held, p1_bad, p2_bad, check_safe_subset(instances, cfg))
