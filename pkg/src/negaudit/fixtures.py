"""Synthetic label tables and prediction sets with known count structure.

The tables are shaped so the builders emit protocols with the target
record counts (235 direct-presence records from 82 of 200 studies, 507
absence records from 132 of 200 studies with the target finding mix).
Predictions are assigned outcome by outcome from a seeded permutation, so a
fixture with ``n_correct/n_negated/n_other`` has exactly those counts.
"""

from __future__ import annotations

import random
from typing import Sequence

from negaudit.answers import AnswerOption, Polarity, PredictionRecord, ProtocolItem, ProtocolKind
from negaudit.builder import (
    DEFAULT_VOCABULARY,
    PRESENCE_QUESTION,
    BuildConfig,
    Label,
    LabelTable,
    StudyLabels,
    build_direct_presence,
    build_report_absence,
    slot_permutation,
)
from negaudit.lexicon import render_negated, render_positive

ABSENCE_TARGET_MIX = {
    "pneumothorax": 126,
    "consolidation": 100,
    "edema": 90,
    "pleural effusion": 68,
    "cardiomegaly": 66,
    "atelectasis": 57,
}
RETRO_FINDINGS = (
    "aortic knob enlargement",
    "descending aortic enlargement",
    "descending aortic tortuosity",
    "tracheal deviation",
    "ascending aortic enlargement",
)


def _study_id(j: int) -> str:
    return f"patient{j:05d}/study1"


def _row(j: int, labels: dict[str, Label]) -> StudyLabels:
    return StudyLabels(_study_id(j), (f"{_study_id(j)}/view1_frontal.jpg",), labels)


def presence_label_table(
    n_three: int = 71, n_two: int = 11, n_unconstructible: int = 118, vocabulary: Sequence[str] = DEFAULT_VOCABULARY
) -> LabelTable:
    """Studies with 3 or 2 present findings (rest absent) plus single-finding studies.

    The defaults give 200 studies, 82 constructible, 235 direct-presence records.
    """
    vocab = list(vocabulary)
    rows = []
    j = 0
    for k, count in ((3, n_three), (2, n_two)):
        for _ in range(count):
            present = {vocab[(j + s) % len(vocab)] for s in range(k)}
            rows.append(_row(j, {f: Label.PRESENT if f in present else Label.ABSENT for f in vocab}))
            j += 1
    for _ in range(n_unconstructible):
        only = vocab[j % len(vocab)]
        rows.append(_row(j, {f: Label.PRESENT if f == only else Label.UNCERTAIN for f in vocab}))
        j += 1
    return LabelTable(tuple(rows))


def absence_label_table(
    target_mix: dict[str, int] = ABSENCE_TARGET_MIX,
    n_constructible: int = 132,
    n_unconstructible: int = 68,
    vocabulary: Sequence[str] = DEFAULT_VOCABULARY,
) -> LabelTable:
    """Deal absent targets round-robin over the constructible studies.

    Each target finding occupies consecutive studies, so no study receives
    the same finding twice as long as every count is at most
    ``n_constructible``. Each constructible study marks its first
    non-absent vocabulary finding PRESENT and the rest UNCERTAIN.
    """
    vocab = list(vocabulary)
    deal = [f for f, count in target_mix.items() for _ in range(count)]
    if max(target_mix.values()) > n_constructible:
        raise ValueError("a target count exceeds the number of studies")
    absent: list[list[str]] = [[] for _ in range(n_constructible)]
    for pos, finding in enumerate(deal):
        absent[pos % n_constructible].append(finding)
    rows = []
    for j, targets in enumerate(absent):
        rest = [f for f in vocab if f not in targets]
        if not rest:
            raise ValueError(f"study {j} has no finding left to mark present")
        labels = {f: Label.ABSENT for f in targets}
        labels[rest[0]] = Label.PRESENT
        labels.update({f: Label.UNCERTAIN for f in rest[1:]})
        rows.append(_row(j, labels))
    for k in range(n_unconstructible):
        rows.append(_row(n_constructible + k, {f: Label.ABSENT for f in vocab}))
    return LabelTable(tuple(rows))


def direct_presence_items(cfg: BuildConfig = BuildConfig()) -> list[ProtocolItem]:
    return build_direct_presence(presence_label_table(vocabulary=cfg.finding_vocabulary), cfg)


def absence_items(cfg: BuildConfig = BuildConfig()) -> list[ProtocolItem]:
    return build_report_absence(absence_label_table(vocabulary=cfg.finding_vocabulary), cfg)


def scale_label_table(n_studies: int = 59173, n_three: int = 17408) -> LabelTable:
    """Direct-presence table at training-split scale: 3*n_three + 2*(rest) records."""
    return presence_label_table(n_three=n_three, n_two=n_studies - n_three, n_unconstructible=0)


def _other_index(item: ProtocolItem) -> int:
    for i, o in enumerate(item.options):
        if i != item.gold_index and not o.is_negated:
            return i
    raise ValueError(f"{item.item_id} has no non-gold positive option")


def make_predictions(
    items: Sequence[ProtocolItem], n_correct: int, n_negated: int, n_other: int, seed: int = 0
) -> list[PredictionRecord]:
    """Exactly ``n_correct`` gold picks, ``n_negated`` negated picks and ``n_other`` distractor picks."""
    if n_correct + n_negated + n_other != len(items):
        raise ValueError(f"outcome counts sum to {n_correct + n_negated + n_other}, not {len(items)}")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    outcome = [""] * len(items)
    for rank, idx in enumerate(order):
        outcome[idx] = "gold" if rank < n_correct else "neg" if rank < n_correct + n_negated else "other"
    preds = []
    for item, kind in zip(items, outcome):
        if kind == "gold":
            choice = item.gold_index
        elif kind == "neg":
            negated = item.negated_indices
            if len(negated) != 1:
                raise ValueError(f"{item.item_id} has no unique negated option")
            choice = negated[0]
        else:
            choice = _other_index(item)
        preds.append(PredictionRecord(item.item_id, choice))
    return preds


def remap_to_layout(shuffled: Sequence[ProtocolItem], predictions: Sequence[PredictionRecord]) -> list[PredictionRecord]:
    """Carry predictions made on the original layout to the shuffled one (same option chosen)."""
    perms = {it.item_id: slot_permutation(it) for it in shuffled}
    out = []
    for p in predictions:
        perm = perms[p.item_id]
        if perm is None:
            raise ValueError(f"{p.item_id} is not a shuffled item")
        out.append(PredictionRecord(p.item_id, perm.index(p.choice_index)))
    return out


def retro_presence_fixture(
    n_paired: int = 323, n_unpaired: int = 73, n_correct: int = 117, n_repairable: int = 197, n_other: int = 9
) -> tuple[list[ProtocolItem], list[PredictionRecord]]:
    """Retrospective presence audit where only part of the negated picks are repairable.

    Paired items are ``[X, No X, Y]`` with gold X. Unpaired items are
    ``[Y, No X, Z]`` with gold Y: the negated option has no positive
    counterpart, and every unpaired item is predicted as the negated option.
    """
    if n_correct + n_repairable + n_other != n_paired:
        raise ValueError("paired outcome counts must sum to n_paired")
    items = []
    for j in range(n_paired + n_unpaired):
        x = RETRO_FINDINGS[j % 5]
        y = RETRO_FINDINGS[(j + 1) % 5]
        z = RETRO_FINDINGS[(j + 2) % 5]
        paired = j < n_paired
        first = x if paired else y
        last = y if paired else z
        options = (
            AnswerOption(render_positive(first), first, Polarity.POS),
            AnswerOption(render_negated(x, "canonical_no"), x, Polarity.NEG, "canonical_no"),
            AnswerOption(render_positive(last), last, Polarity.POS),
        )
        sid = f"openi{j // 2:04d}"
        items.append(
            ProtocolItem(
                item_id=f"rp-{j:04d}",
                study_id=sid,
                image_refs=(f"{sid}.png",),
                question=PRESENCE_QUESTION,
                options=options,
                gold_index=0,
                protocol_kind=ProtocolKind.RETRO_PRESENCE,
                target_finding=x,
            )
        )
    preds = make_predictions(items[:n_paired], n_correct, n_repairable, n_other, seed=1)
    preds += [PredictionRecord(it.item_id, 1) for it in items[n_paired:]]
    return items, preds


def rexvqa_like_fixture(n: int = 1000, n_negated_wrong: int = 4, n_other_wrong: int = 60) -> tuple[list[ProtocolItem], list[PredictionRecord]]:
    """Mostly-correct four-option presence items with a handful of negated picks."""
    vocab = list(DEFAULT_VOCABULARY)
    items = []
    for j in range(n):
        x, y, z = vocab[j % 6], vocab[(j + 1) % 6], vocab[(j + 3) % 6]
        options = (
            AnswerOption(render_positive(y), y, Polarity.POS),
            AnswerOption(render_positive(x), x, Polarity.POS),
            AnswerOption(render_negated(x, "canonical_no"), x, Polarity.NEG, "canonical_no"),
            AnswerOption(render_positive(z), z, Polarity.POS),
        )
        items.append(
            ProtocolItem(
                item_id=f"rex-{j:05d}",
                study_id=f"rexstudy{j // 4:05d}",
                image_refs=(),
                question="Which of the following findings is present in this study?",
                options=options,
                gold_index=1,
                protocol_kind=ProtocolKind.DIRECT_PRESENCE,
                target_finding=x,
            )
        )
    preds = make_predictions(items, n - n_negated_wrong - n_other_wrong, n_negated_wrong, n_other_wrong, seed=3)
    return items, preds


def gap_fixture(gaps: Sequence[float] = (3.5, 4.2, 4.9, 5.6, 5.75)) -> tuple[list[ProtocolItem], list[PredictionRecord]]:
    """Items whose negated-minus-positive log-prob gaps are exactly ``gaps``."""
    items = direct_presence_items()[: len(gaps)]
    preds = []
    for item, gap in zip(items, gaps):
        logprobs = [-6.0] * len(item.options)
        logprobs[item.gold_index] = -1.0 - gap
        logprobs[item.negated_indices[0]] = -1.0
        preds.append(PredictionRecord(item.item_id, item.negated_indices[0], option_logprobs=tuple(logprobs)))
    return items, preds
