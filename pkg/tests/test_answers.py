import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_item, neg, pos, pred
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
from negaudit.fixtures import absence_items


def test_option_invariants():
    with pytest.raises(ValueError):
        AnswerOption("No edema", "edema", Polarity.NEG)
    with pytest.raises(ValueError):
        AnswerOption("Edema", "edema", Polarity.POS, "canonical_no")
    with pytest.raises(ValueError):
        AnswerOption("Edema", " edema", Polarity.POS)
    with pytest.raises(ValueError):
        AnswerOption("Edema", "", Polarity.POS)


def test_valid_absence_item_has_no_violations():
    item = make_item([pos("edema"), neg("edema"), pos("pleural effusion")], kind=ProtocolKind.REPORT_ABSENCE)
    report = validate_protocol([item])
    assert report.ok and not report.errors and not report.warnings


def test_control_with_negated_option_is_one_violation():
    item = make_item([pos("edema"), neg("pneumothorax"), pos("atelectasis")], kind=ProtocolKind.POSITIVE_CONTROL)
    report = validate_protocol([item])
    assert [v.message for v in report.errors] == ["control item contains negated option"]


def test_structural_errors_are_keyed_by_item():
    good = make_item([pos("edema"), neg("edema"), pos("atelectasis")])
    dup = good.replace()
    no_neg = make_item([pos("edema"), pos("pneumothorax"), pos("atelectasis")], item_id="x", target="edema")
    wrong_concept = make_item([pos("edema"), neg("edema"), pos("atelectasis")], item_id="y", target="atelectasis")
    report = validate_protocol([good, dup, no_neg, wrong_concept])
    codes = sorted((v.item_id, v.code) for v in report.errors)
    assert codes == [("it-1", "duplicate_item_id"), ("x", "negation_count"), ("y", "negation_concept_mismatch")]


def test_gold_out_of_range_is_an_error_entry():
    item = make_item([pos("edema"), neg("edema"), pos("atelectasis")], gold=3, target="edema")
    report = validate_protocol([item])
    assert [v.code for v in report.errors] == ["gold_out_of_range"]


def test_duplicate_positive_concept_is_a_warning():
    item = make_item([pos("edema"), neg("edema"), pos("edema")])
    report = validate_protocol([item])
    assert report.ok
    assert [v.code for v in report.warnings] == ["duplicate_positive_concept"]


def test_builder_absence_fixture_validates_cleanly():
    items = absence_items()
    assert len(items) == 507
    report = validate_protocol(items)
    assert report.ok and not report.errors


def test_validation_is_idempotent():
    items = absence_items()[:50] + [make_item([pos("edema"), neg("edema"), pos("edema")], item_id="w")]
    assert validate_protocol(items).to_dict() == validate_protocol(items).to_dict()


def test_join_diagnostics():
    items = [make_item([pos("edema"), neg("edema"), pos("atelectasis")], item_id=f"i{k}") for k in range(3)]
    full = join_predictions(items, [pred(f"i{k}", 0) for k in range(3)])
    assert len(full.pairs) == 3 and not full.missing and not full.errors

    partial = join_predictions(items, [pred("i0", 0), pred("i2", 1)])
    assert [it.item_id for it, _ in partial.pairs] == ["i0", "i2"]
    assert partial.missing == ("i1",)

    with pytest.raises(JoinError, match="i1"):
        join_predictions(items, [pred("i1", 0), pred("i1", 2)])

    orphan = join_predictions(items, [pred("zzz", 0)])
    assert [v.code for v in orphan.errors] == ["orphan_prediction"]
    with pytest.raises(JoinError):
        orphan.raise_for_errors()

    bad = join_predictions(items, [pred("i0", 5), pred("i1", 0, option_logprobs=(0.0, -1.0))])
    assert sorted(v.code for v in bad.errors) == ["choice_out_of_range", "logprob_length"]


def test_join_preserves_protocol_order():
    items = [make_item([pos("edema"), neg("edema"), pos("atelectasis")], item_id=f"i{k}") for k in range(5)]
    preds = [pred(f"i{k}", 0) for k in (4, 2, 0, 3, 1)]
    assert [it.item_id for it, _ in join_predictions(items, preds).pairs] == [f"i{k}" for k in range(5)]


def test_verified_invariants():
    with pytest.raises(ValueError):
        VerifiedPrediction("a", 1, 0, False, Reason.NOT_NEGATED_PREDICTION)
    with pytest.raises(ValueError):
        VerifiedPrediction("a", 1, 0, False, Reason.REPAIRED_PRESENCE)
    with pytest.raises(ValueError):
        VerifiedPrediction("a", 1, 0, True, Reason.PASS_THROUGH)
    v = VerifiedPrediction("a", 1, 0, True, Reason.REPAIRED_PRESENCE)
    assert VerifiedPrediction.from_dict(json.loads(json.dumps(v.to_dict()))) == v


def test_prediction_confidence_bounds():
    with pytest.raises(ValueError):
        PredictionRecord("a", 0, base_confidence=1.2)
    with pytest.raises(ValueError):
        PredictionRecord("a", 0, packet_confidence=-0.1)


def test_unknown_fields_are_echoed():
    item = make_item([pos("edema"), neg("edema"), pos("atelectasis")])
    data = item.to_dict()
    data["source"] = "chexpert-valid"
    back = ProtocolItem.from_dict(data)
    assert back.to_dict()["source"] == "chexpert-valid"
    p = PredictionRecord.from_dict({"item_id": "a", "choice_index": 1, "model": "m"})
    assert p.to_dict() == {"item_id": "a", "choice_index": 1, "model": "m"}


def test_string_answer_resolved_by_surface_match():
    data = {
        "item_id": "q",
        "study_id": "s",
        "image_refs": [],
        "question": "Which of the following findings is present on this chest X-ray study?",
        "options": ["Edema", "No edema", "Atelectasis"],
        "answer": "Atelectasis",
        "protocol_kind": "DIRECT_PRESENCE",
        "target_finding": "edema",
    }
    item = ProtocolItem.from_dict(data)
    assert item.gold_index == 2
    assert item.options[1].polarity is Polarity.NEG
    data["answer"] = "atelectasis."
    with pytest.raises(ValueError):
        ProtocolItem.from_dict(data)


_concepts = st.sampled_from(["edema", "pleural effusion", "cardiomegaly", "atelectasis", "lung opacity"])


@st.composite
def protocol_items(draw):
    concepts = draw(st.lists(_concepts, min_size=2, max_size=5, unique=True))
    target = concepts[0]
    options = [pos(c) for c in concepts]
    pattern = draw(st.sampled_from(["canonical_no", "absence_of", "not_present", "no_evidence_of", "clear_of"]))
    slot = draw(st.integers(0, len(options)))
    options.insert(slot, neg(target, pattern))
    gold = draw(st.sampled_from([i for i, o in enumerate(options) if not o.is_negated]))
    kind = draw(st.sampled_from([k for k in ProtocolKind if k is not ProtocolKind.POSITIVE_CONTROL]))
    extra = draw(st.dictionaries(st.sampled_from(["note", "source"]), st.text(max_size=8), max_size=2))
    return ProtocolItem(
        item_id=draw(st.text(min_size=1, max_size=12)),
        study_id=draw(st.text(min_size=1, max_size=12)),
        image_refs=tuple(draw(st.lists(st.text(max_size=10), max_size=3))),
        question=draw(st.sampled_from(["Which finding is present?", "Which finding is absent?"])),
        options=tuple(options),
        gold_index=gold,
        protocol_kind=kind,
        target_finding=target,
        variant_tag=pattern,
        extra=extra,
    )


@given(protocol_items())
def test_round_trip(item):
    line = json.dumps(item.to_dict())
    back = ProtocolItem.from_dict(json.loads(line))
    assert back == item
    assert back.extra == item.extra
    assert back.to_dict() == item.to_dict()
