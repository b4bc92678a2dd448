"""Seeded percentile bootstrap and paired sign-flip permutation tests.

Iteration ``i`` always draws from a generator seeded by ``(seed, i)``, so
results do not depend on how iterations are scheduled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np


class Method(str, enum.Enum):
    EXAMPLE = "EXAMPLE"
    STUDY_CLUSTERED = "STUDY_CLUSTERED"


@dataclass(frozen=True)
class ResampleConfig:
    n_resamples: int = 2000
    seed: int = 42
    confidence_level: float = 0.95
    method: Method = Method.EXAMPLE

    def __post_init__(self) -> None:
        if self.n_resamples < 1:
            raise ValueError("n_resamples must be >= 1")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError("confidence_level must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_resamples": self.n_resamples,
            "seed": self.seed,
            "confidence_level": self.confidence_level,
            "method": self.method.value,
        }


@dataclass(frozen=True)
class IntervalResult:
    point: float
    low: float
    high: float
    n_resamples_used: int
    method: Method
    seed: int
    confidence_level: float = 0.95

    @property
    def width(self) -> float:
        return self.high - self.low

    def to_dict(self) -> dict[str, Any]:
        return {
            "point": self.point,
            "ci_low": self.low,
            "ci_high": self.high,
            "method": self.method.value,
            "seed": self.seed,
            "n_resamples": self.n_resamples_used,
            "confidence_level": self.confidence_level,
        }


@dataclass(frozen=True)
class PermutationResult:
    observed_delta: float
    p_value: float
    n_resamples: int
    seed: int
    method: Method

    def to_dict(self) -> dict[str, Any]:
        return {
            "observed_delta": self.observed_delta,
            "p_value": self.p_value,
            "method": self.method.value,
            "seed": self.seed,
            "n_resamples": self.n_resamples,
        }


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, iteration])))


def _percentiles(stats: np.ndarray, confidence_level: float) -> tuple[float, float]:
    alpha = (1.0 - confidence_level) / 2.0
    low, high = np.percentile(stats, [100.0 * alpha, 100.0 * (1.0 - alpha)], axis=-1)
    return float(low), float(high)


def _is_mean(statistic: str) -> bool:
    if statistic not in ("mean", "sum"):
        raise ValueError(f"statistic must be 'mean' or 'sum', got {statistic!r}")
    return statistic == "mean"


def _clusters(study_ids: Sequence[str], n: int) -> np.ndarray:
    if len(study_ids) != n:
        raise ValueError(f"{len(study_ids)} study ids for {n} values")
    _, first, inverse = np.unique(np.asarray(study_ids, dtype=object), return_index=True, return_inverse=True)
    # relabel clusters by order of first appearance
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank[inverse]


def bootstrap_cis(
    vectors: Mapping[str, Sequence[float]],
    cfg: ResampleConfig = ResampleConfig(),
    study_ids: Sequence[str] | None = None,
    statistic: str | Mapping[str, str] = "mean",
) -> dict[str, IntervalResult]:
    """Percentile CIs for several aligned per-item vectors using shared draws.

    ``statistic="mean"`` reports on the percentage scale; ``"sum"`` reports
    counts. A mapping picks the statistic per vector. With
    ``cfg.method == STUDY_CLUSTERED`` whole studies are drawn with
    replacement and all their records included.
    """
    names = list(vectors)
    kinds = [statistic if isinstance(statistic, str) else statistic[k] for k in names]
    matrix = np.asarray([np.asarray(vectors[k], dtype=float) for k in names])
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise ValueError("bootstrap needs non-empty, equal-length vectors")
    n = matrix.shape[1]
    is_mean = np.array([_is_mean(kind) for kind in kinds])
    totals = np.empty((len(names), cfg.n_resamples))
    sizes = np.full(cfg.n_resamples, float(n))

    # Each draw is reduced to per-unit multiplicities, so the resampled sums
    # are one matrix-vector product instead of a gather over every record.
    if cfg.method is Method.STUDY_CLUSTERED:
        if study_ids is None:
            raise ValueError("clustered bootstrap needs study_ids")
        cluster = _clusters(study_ids, n)
        k = int(cluster.max()) + 1
        units = np.stack([np.bincount(cluster, weights=row, minlength=k) for row in matrix])
        unit_sizes = np.bincount(cluster, minlength=k).astype(float)
        for i in range(cfg.n_resamples):
            mult = np.bincount(iteration_rng(cfg.seed, i).integers(0, k, size=k), minlength=k).astype(float)
            totals[:, i] = units @ mult
            sizes[i] = unit_sizes @ mult
    else:
        for i in range(cfg.n_resamples):
            mult = np.bincount(iteration_rng(cfg.seed, i).integers(0, n, size=n), minlength=n).astype(float)
            totals[:, i] = matrix @ mult

    stats = np.where(is_mean[:, None], totals * (100.0 / sizes), totals)
    sums = matrix.sum(axis=1)
    point = np.where(is_mean, sums * (100.0 / n), sums)
    out = {}
    for row, name in enumerate(names):
        low, high = _percentiles(stats[row], cfg.confidence_level)
        out[name] = IntervalResult(
            point=float(point[row]),
            low=low,
            high=high,
            n_resamples_used=cfg.n_resamples,
            method=cfg.method,
            seed=cfg.seed,
            confidence_level=cfg.confidence_level,
        )
    return out


def bootstrap_ci(
    values: Sequence[float], cfg: ResampleConfig = ResampleConfig(), statistic: str = "mean"
) -> IntervalResult:
    """Example-level percentile bootstrap of a per-item 0/1 vector."""
    if len(values) == 0:
        raise ValueError("bootstrap_ci needs a non-empty vector")
    example_cfg = cfg if cfg.method is Method.EXAMPLE else ResampleConfig(
        cfg.n_resamples, cfg.seed, cfg.confidence_level, Method.EXAMPLE
    )
    return bootstrap_cis({"v": values}, example_cfg, statistic=statistic)["v"]


def clustered_bootstrap_ci(
    values: Sequence[float],
    study_ids: Sequence[str],
    cfg: ResampleConfig = ResampleConfig(method=Method.STUDY_CLUSTERED),
    statistic: str = "mean",
) -> IntervalResult:
    if len(values) == 0:
        raise ValueError("clustered_bootstrap_ci needs a non-empty vector")
    clustered = ResampleConfig(cfg.n_resamples, cfg.seed, cfg.confidence_level, Method.STUDY_CLUSTERED)
    return bootstrap_cis({"v": values}, clustered, study_ids=study_ids, statistic=statistic)["v"]


def paired_permutation_test(
    base_correct: Sequence[int],
    verified_correct: Sequence[int],
    cfg: ResampleConfig = ResampleConfig(),
    study_ids: Sequence[str] | None = None,
) -> PermutationResult:
    """One-sided test of ``mean(verified) > mean(base)`` by random pair swaps.

    Swapping a pair flips the sign of its difference; pairs with zero
    difference are unaffected and are skipped. Under STUDY_CLUSTERED all
    pairs of a study swap together. ``p = (1 + #{perm >= obs}) / (1 + B)``.
    """
    base = np.asarray(base_correct, dtype=np.int64)
    verified = np.asarray(verified_correct, dtype=np.int64)
    if base.shape != verified.shape:
        raise ValueError(f"length mismatch: {base.shape[0]} base vs {verified.shape[0]} verified")
    n = base.shape[0]
    if n == 0:
        raise ValueError("permutation test needs at least one pair")
    d = verified - base
    observed = int(d.sum())

    if cfg.method is Method.STUDY_CLUSTERED:
        if study_ids is None:
            raise ValueError("clustered permutation test needs study_ids")
        cluster = _clusters(study_ids, n)
        units = np.bincount(cluster, weights=d).astype(np.int64)
    else:
        units = d
    units = units[units != 0]

    hits = 0
    for i in range(cfg.n_resamples):
        signs = iteration_rng(cfg.seed, i).integers(0, 2, size=units.shape[0]) * 2 - 1
        if int((signs * units).sum()) >= observed:
            hits += 1
    return PermutationResult(
        observed_delta=observed / n,
        p_value=(1 + hits) / (1 + cfg.n_resamples),
        n_resamples=cfg.n_resamples,
        seed=cfg.seed,
        method=cfg.method,
    )
