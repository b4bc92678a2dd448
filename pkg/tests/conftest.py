from __future__ import annotations

import pytest

from negaudit.answers import AnswerOption, Polarity, PredictionRecord, ProtocolItem, ProtocolKind
from negaudit.builder import ABSENCE_QUESTION, PRESENCE_QUESTION
from negaudit.lexicon import render_negated, render_positive


def pos(concept: str) -> AnswerOption:
    return AnswerOption(render_positive(concept), concept, Polarity.POS)


def neg(concept: str, pattern: str = "canonical_no") -> AnswerOption:
    return AnswerOption(render_negated(concept, pattern), concept, Polarity.NEG, pattern)


def make_item(
    options,
    gold: int = 0,
    kind: ProtocolKind = ProtocolKind.DIRECT_PRESENCE,
    item_id: str = "it-1",
    study_id: str = "s-1",
    question: str | None = None,
    target: str | None = None,
) -> ProtocolItem:
    if question is None:
        absence = kind in (ProtocolKind.REPORT_ABSENCE, ProtocolKind.RETRO_ABSENCE)
        question = ABSENCE_QUESTION if absence else PRESENCE_QUESTION
    if target is None:
        negs = [o for o in options if o.is_negated]
        target = negs[0].concept if negs else options[gold].concept
    return ProtocolItem(
        item_id=item_id,
        study_id=study_id,
        image_refs=(f"{study_id}.jpg",),
        question=question,
        options=tuple(options),
        gold_index=gold,
        protocol_kind=kind,
        target_finding=target,
    )


def pred(item_id: str, choice: int, **kw) -> PredictionRecord:
    return PredictionRecord(item_id, choice, **kw)


@pytest.fixture
def presence_item() -> ProtocolItem:
    return make_item([pos("consolidation"), neg("consolidation"), pos("edema")])


@pytest.fixture
def absence_item() -> ProtocolItem:
    return make_item([pos("pneumothorax"), neg("pneumothorax"), pos("edema")], kind=ProtocolKind.REPORT_ABSENCE)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
