import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_item, neg, pos, pred
from negaudit.answers import PredictionRecord, ProtocolKind, VerifiedPrediction
from negaudit.fixtures import (
    absence_items,
    direct_presence_items,
    gap_fixture,
    make_predictions,
    retro_presence_fixture,
)
from negaudit.metrics import comparison_row, diff, logprob_gap, render_markdown, safe_subset_ids, score
from negaudit.rounding import percent
from negaudit.verifier import VerifierConfig, batch_verify


def test_percent_half_up():
    assert percent(1, 8) == 12.5
    assert percent(1, 3) == 33.33
    assert percent(2, 3) == 66.67
    assert percent(1, 200) == 0.5
    assert percent(1, 400) == 0.25
    assert percent(1, 800) == 0.13  # 0.125 rounds up
    assert percent(0, 0) is None


def test_absence_fixture_score():
    items = absence_items()
    report = score(items, make_predictions(items, 2, 504, 1))
    assert (report.n, report.correct, report.contradictions, report.presence_reversals) == (507, 2, 504, 0)
    assert report.accuracy_pct == 0.39


def test_retro_fixture_score():
    items, preds = retro_presence_fixture()
    report = score(items, preds)
    assert report.accuracy_pct == 29.55
    assert (report.wrong_with_negation, report.repairable_reversals) == (270, 197)
    assert report.presence_reversals == 270


def test_all_gold():
    items = direct_presence_items()
    report = score(items, make_predictions(items, 235, 0, 0))
    assert report.accuracy_pct == 100.0
    assert report.polarity_errors == report.wrong_with_negation == report.repairable_reversals == 0


def test_empty_input():
    report = score([], [])
    assert report.n == 0 and report.accuracy_pct is None


def test_controls_have_no_polarity_errors():
    item = make_item([pos("edema"), pos("pneumothorax"), pos("atelectasis")], kind=ProtocolKind.POSITIVE_CONTROL)
    report = score([item], [pred("it-1", 1)])
    assert report.polarity_errors == 0 and report.wrong_other == 1


def test_breakdowns():
    items = absence_items()
    report = score(items, make_predictions(items, 2, 504, 1))
    assert sum(sub.n for sub in report.per_finding.values()) == 507
    assert report.per_finding["pneumothorax"].n == 126
    assert set(report.question_polarity_split) == {"ABSENCE"}


def test_diff_direct_fixture():
    items = direct_presence_items()
    base = make_predictions(items, 74, 153, 8)
    verified, _ = batch_verify(items, base, VerifierConfig())
    d = diff(items, base, verified)
    assert (d.changed, d.improved, d.worsened, d.changed_still_wrong) == (153, 153, 0, 0)
    assert d.delta_acc_pp == 65.11
    assert d.coverage_pct == 65.11


def test_diff_identical_is_zero():
    items = direct_presence_items()
    base = make_predictions(items, 74, 153, 8)
    d = diff(items, base, base)
    assert (d.changed, d.improved, d.worsened, d.triggered) == (0, 0, 0, 0)


def test_diff_lists_worsened():
    item = make_item([pos("edema"), neg("edema"), pos("atelectasis")], item_id="w")
    d = diff([item], [pred("w", 0)], [pred("w", 2)])
    assert d.worsened == 1 and d.worsened_ids == ["w"]


def test_diff_mismatch():
    items = direct_presence_items()[:3]
    with pytest.raises(ValueError):
        diff(items, [pred(items[0].item_id, 0)], [pred(items[1].item_id, 0)])


def test_logprob_gap_examples():
    item = make_item([pos("edema"), neg("edema"), pos("atelectasis")])
    g = logprob_gap([item], [pred("it-1", 1, option_logprobs=(-2.0, -1.0, -5.0))])
    assert g.gaps == {"it-1": 1.0}
    g = logprob_gap([item], [pred("it-1", 1, option_logprobs=(-1.5, -1.5, -5.0))])
    assert g.gaps == {"it-1": 0.0}
    g = logprob_gap([item], [pred("it-1", 1)])
    assert g.n == 0 and g.skipped_missing_logprobs == 1


def test_logprob_gap_fixture_mean():
    items, preds = gap_fixture()
    g = logprob_gap(items, preds)
    assert g.mean == pytest.approx(4.790, abs=1e-9)
    assert round(g.to_dict()["mean_nats"], 3) == 4.790


def test_gap_over_safe_subset():
    items, preds = gap_fixture()
    verified, _ = batch_verify(items, preds, VerifierConfig())
    safe = safe_subset_ids(items, verified)
    assert len(safe) == 5
    assert logprob_gap(items, preds, subset=safe[:2]).n == 2


def test_markdown_table():
    items = direct_presence_items()
    base = make_predictions(items, 74, 153, 8)
    verified, _ = batch_verify(items, base, VerifierConfig())
    row = comparison_row("direct", score(items, base), score(items, [v.as_prediction() for v in verified]))
    md = render_markdown([row])
    assert "| Base acc | Verified acc | Δpp | Errors before→after |" in md
    assert "| direct | 235 | 31.49 | 96.60 | +65.11 | 153 → 0 |" in md


_choices = st.lists(st.integers(0, 2), min_size=1, max_size=60)


@settings(max_examples=50)
@given(_choices, st.randoms(use_true_random=False))
def test_score_permutation_invariant_and_decomposes(choices, rnd):
    items = direct_presence_items()[: len(choices)]
    preds = [PredictionRecord(it.item_id, c) for it, c in zip(items, choices)]
    report = score(items, preds)
    assert report.n == report.correct + report.wrong_with_negation + report.wrong_other
    assert report.repairable_reversals <= report.wrong_with_negation <= report.n - report.correct
    pairs = list(zip(items, preds))
    rnd.shuffle(pairs)
    shuffled = score([p[0] for p in pairs], [p[1] for p in pairs])
    assert shuffled.to_dict() == report.to_dict()


@settings(max_examples=30)
@given(_choices)
def test_verified_absence_has_no_contradictions(choices):
    items = absence_items()[: len(choices)]
    preds = [PredictionRecord(it.item_id, c) for it, c in zip(items, choices)]
    verified, _ = batch_verify(items, preds, VerifierConfig())
    assert score(items, [v.as_prediction() for v in verified]).contradictions == 0
    d = diff(items, preds, preds)
    assert (d.changed, d.improved, d.worsened) == (0, 0, 0)
