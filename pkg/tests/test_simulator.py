import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_item, neg, pos
from negaudit.answers import Polarity
from negaudit.metrics import logprob_gap
from negaudit.simulator import (
    ScoreModel,
    check_proposition_1,
    check_proposition_2,
    check_safe_subset,
    generate_instances,
    option_scores,
    predict,
    run_proposition_suite,
    score_option,
)

TOY_ITEM = make_item([pos("x"), neg("x"), pos("z")])


def toy_model(**over):
    u = {"x": 5.0, "z": 3.0}
    v = {("x", Polarity.POS): 0.3, ("x", Polarity.NEG): 1.2, ("z", Polarity.POS): 0.8, ("z", Polarity.NEG): 0.0}
    for key, val in over.items():
        if key in u:
            u[key] = val
        else:
            concept, pol = key.split("_")
            v[(concept, Polarity(pol.upper()))] = val
    return ScoreModel(u, v)


def test_toy_scores():
    m = toy_model()
    assert option_scores(m, TOY_ITEM) == pytest.approx([5.3, 6.2, 3.8])
    assert predict(m, TOY_ITEM) == 1


def test_missing_entry_is_an_error():
    m = ScoreModel({"x": 1.0}, {("x", Polarity.POS): 0.0})
    with pytest.raises(KeyError, match="x"):
        score_option(m, TOY_ITEM.options[1])
    with pytest.raises(KeyError, match="z"):
        score_option(m, TOY_ITEM.options[2])


def test_ties_and_dominant_distractor():
    tie = toy_model(x_pos=1.2)
    assert predict(tie, TOY_ITEM) == 0
    assert predict(toy_model(z=10.0), TOY_ITEM) == 2


def test_proposition_1_examples():
    c = check_proposition_1(toy_model(), TOY_ITEM)
    assert c.assumptions_hold and c.conclusion_holds
    assert not check_proposition_1(toy_model(x_neg=0.1), TOY_ITEM).assumptions_hold
    assert not check_proposition_1(toy_model(z=10.0), TOY_ITEM).assumptions_hold


def test_proposition_2_examples():
    c = check_proposition_2(toy_model(), TOY_ITEM)
    assert c.holds and c.predicts_negated and c.same_concept_flipped_polarity
    d = check_proposition_2(toy_model(z=10.0), TOY_ITEM)
    assert d.holds and not d.predicts_negated and not d.same_concept_flipped_polarity
    p = check_proposition_2(toy_model(x_neg=0.0), TOY_ITEM)
    assert p.holds and not p.predicts_negated


def test_precondition_enforced():
    off_gold = make_item([pos("x"), neg("x"), pos("z")], gold=2)
    with pytest.raises(ValueError):
        check_proposition_1(toy_model(), off_gold)


def test_generation_is_deterministic():
    a = generate_instances(7, 3)
    b = generate_instances(7, 3)
    assert [i.item for i in a] == [i.item for i in b]
    assert [i.prediction for i in a] == [i.prediction for i in b]
    assert [i.model.to_dict() for i in a] == [i.model.to_dict() for i in b]
    assert all(3 <= len(i.item.options) <= 5 for i in generate_instances(7, 200))


def test_strong_bias_always_predicts_negated():
    inst = generate_instances(1, 500, u_range=(5, 6), v_pos_range=(0, 0.1), v_neg_range=(3, 4), distractor_u_range=(0, 1))
    assert sum(i.prediction.choice_index == i.item.negated_indices[0] for i in inst) == 500
    report = check_safe_subset(inst)
    assert report.ok
    assert report.base_correct == 0 and report.verified_correct == 500
    assert report.delta_acc == 1


def test_equal_residuals_never_pick_negated():
    inst = generate_instances(2, 500, v_pos_range=(1, 1), v_neg_range=(1, 1))
    for i in inst:
        assert not i.item.options[i.prediction.choice_index].is_negated


def test_mixed_population_identities():
    inst = generate_instances(3, 2000, distractor_u_range=(0, 8))
    report = check_safe_subset(inst)
    errors = report.n - report.base_correct
    assert report.triggered < errors
    assert report.ok and not report.harm_ids


def test_empty_population_passes():
    assert check_safe_subset([]).ok


def test_logprobs_preserve_score_gaps():
    for inst in generate_instances(4, 50):
        scores = option_scores(inst.model, inst.item)
        lp = inst.prediction.option_logprobs
        assert math.isclose(sum(math.exp(x) for x in lp), 1.0, rel_tol=1e-9)
        for i in range(len(lp)):
            assert lp[i] - lp[0] == pytest.approx(scores[i] - scores[0], abs=1e-9)
    gaps = logprob_gap([i.item for i in generate_instances(4, 50)], [i.prediction for i in generate_instances(4, 50)])
    assert gaps.n == 50


def test_suite_on_small_population():
    report = run_proposition_suite(generate_instances(5, 1000))
    assert report.ok and report.prop1_assumptions_held > 0


@settings(max_examples=100)
@given(
    st.floats(-5, 5), st.floats(-5, 5),
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
)
def test_score_is_additive(ux, uz, vxp, vxn, vzp):
    m = ScoreModel(
        {"x": ux, "z": uz},
        {("x", Polarity.POS): vxp, ("x", Polarity.NEG): vxn, ("z", Polarity.POS): vzp, ("z", Polarity.NEG): 0.0},
    )
    for o in TOY_ITEM.options:
        assert score_option(m, o) - m.v[(o.concept, o.polarity)] == pytest.approx(m.u[o.concept], abs=1e-12)
    assert check_proposition_2(m, TOY_ITEM).holds
    assert not check_proposition_1(m, TOY_ITEM).counterexample
