import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negaudit.resampling import (
    Method,
    ResampleConfig,
    bootstrap_ci,
    bootstrap_cis,
    clustered_bootstrap_ci,
    iteration_rng,
    paired_permutation_test,
)

CFG = ResampleConfig()
CLUSTER = ResampleConfig(method=Method.STUDY_CLUSTERED)


def ones_and_zeros(k, n):
    v = np.zeros(n)
    v[:k] = 1
    return v


def test_config_validation():
    with pytest.raises(ValueError):
        ResampleConfig(n_resamples=0)
    with pytest.raises(ValueError):
        ResampleConfig(confidence_level=1.0)


def test_degenerate_vectors():
    r = bootstrap_ci(np.ones(100), CFG)
    assert (r.point, r.low, r.high) == (100.0, 100.0, 100.0)
    r = bootstrap_ci(np.zeros(100), CFG)
    assert (r.point, r.low, r.high) == (0.0, 0.0, 0.0)


def test_empty_vector_is_an_error():
    with pytest.raises(ValueError):
        bootstrap_ci([], CFG)
    with pytest.raises(ValueError):
        clustered_bootstrap_ci([], [], CLUSTER)


def test_interval_near_reference():
    r = bootstrap_ci(ones_and_zeros(122, 507), CFG)
    assert r.point == pytest.approx(24.06, abs=0.005)
    assert abs(r.low - 20.51) <= 1.5 and abs(r.high - 27.81) <= 1.5
    assert r.low <= r.point <= r.high
    assert r.n_resamples_used == 2000 and r.seed == 42


def test_sum_statistic_counts():
    r = bootstrap_ci(ones_and_zeros(50, 200), CFG, statistic="sum")
    assert r.point == 50
    assert 30 < r.low < 50 < r.high < 70


def test_determinism():
    v = ones_and_zeros(122, 507)
    assert bootstrap_ci(v, CFG) == bootstrap_ci(v, CFG)
    assert bootstrap_ci(v, ResampleConfig(seed=7)) != bootstrap_ci(v, CFG)


def test_iteration_rng_is_keyed_by_seed_and_index():
    a = iteration_rng(42, 3).integers(0, 1 << 30, 5)
    b = iteration_rng(42, 3).integers(0, 1 << 30, 5)
    c = iteration_rng(42, 4).integers(0, 1 << 30, 5)
    assert (a == b).all() and not (a == c).all()


def test_width_shrinks_with_n():
    narrow = bootstrap_ci(ones_and_zeros(1000, 2000), CFG)
    wide = bootstrap_ci(ones_and_zeros(100, 200), CFG)
    assert narrow.width <= wide.width


def test_singleton_clusters_match_example_level():
    v = ones_and_zeros(700, 2000)
    studies = [f"s{i}" for i in range(2000)]
    a = bootstrap_ci(v, CFG)
    b = clustered_bootstrap_ci(v, studies, CLUSTER)
    assert abs(a.low - b.low) <= 1.0 and abs(a.high - b.high) <= 1.0


def test_one_study_gives_point_interval():
    v = ones_and_zeros(30, 90)
    r = clustered_bootstrap_ci(v, ["s"] * 90, CLUSTER)
    assert r.low == r.point == r.high


def test_clustered_is_not_narrower_for_correlated_studies():
    # records within a study share correctness, so resampling studies adds variance
    rng = np.random.default_rng(0)
    per_study = rng.integers(0, 2, 132)
    values = np.repeat(per_study, 4).astype(float)
    studies = np.repeat([f"s{i}" for i in range(132)], 4)
    a = bootstrap_ci(values, CFG)
    b = clustered_bootstrap_ci(values, list(studies), CLUSTER)
    assert b.width >= a.width


def test_shared_draws_across_vectors():
    base = ones_and_zeros(74, 235)
    out = bootstrap_cis({"a": base, "b": base}, CFG)
    assert out["a"] == out["b"]
    with pytest.raises(ValueError):
        bootstrap_cis({"a": base, "b": base[:10]}, CFG)


def test_permutation_examples():
    base = ones_and_zeros(74, 235)
    verified = ones_and_zeros(227, 235)
    assert paired_permutation_test(base, verified, CFG).p_value < 0.001
    same = paired_permutation_test(base, base, CFG)
    assert same.observed_delta == 0 and same.p_value > 0.4
    one = np.zeros(1000)
    better = one.copy()
    better[0] = 1
    p = paired_permutation_test(one, better, CFG).p_value
    assert 0.45 <= p <= 0.55


def test_permutation_clustered_and_errors():
    base = ones_and_zeros(74, 235)
    verified = ones_and_zeros(227, 235)
    studies = [f"s{i // 3}" for i in range(235)]
    r = paired_permutation_test(base, verified, CLUSTER, study_ids=studies)
    assert r.p_value < 0.001 and r.method is Method.STUDY_CLUSTERED
    with pytest.raises(ValueError):
        paired_permutation_test(base, verified[:10], CFG)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80), st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_p_value_bounds(a, b):
    n = min(len(a), len(b))
    r = paired_permutation_test(a[:n], b[:n], ResampleConfig(n_resamples=200))
    assert 0 < r.p_value <= 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80))
def test_interval_ordered(values):
    r = bootstrap_ci(values, ResampleConfig(n_resamples=200))
    assert 0 <= r.low <= r.high <= 100
