"""Multinomial blending: sample a content type per position, place that type's best item.

The strict variant fills every position by drawing a type from a fixed
probability vector (renormalized over the types whose pools are not yet
exhausted) and appending the highest-scoring remaining candidate of that
type. Expected per-type exposure therefore equals the probability vector,
independently of the score scale, while within-type order is preserved.

The at-least variant only triggers blending when the plain score-sorted
ranking gives the designated slow type less exposure than its budget; the
sorted ranking is otherwise returned untouched (and the RNG not advanced).
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    CandidatePool,
    EmptyPoolError,
    InvalidConfigError,
    Slate,
    SlateEntry,
    sort_rank,
)
from .rng import SplitMix64

PROB_SUM_TOL = 1e-6

VARIANT_STRICT = "strict"
VARIANT_AT_LEAST = "at_least"


@dataclass(frozen=True)
class BlendConfig:
    """Per-type sampling probabilities plus the policy variant.

    probs must be non-negative and sum to 1 within 1e-6 (serialization
    rounding); they are renormalized to sum exactly to 1 on construction.
    slow_type is required iff variant == "at_least".
    """

    probs: tuple[float, ...]
    variant: str = VARIANT_STRICT
    slow_type: int | None = None

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 1:
            raise InvalidConfigError("probs must have at least one entry")
        for i, p in enumerate(probs):
            if not p >= 0.0:  # also rejects NaN
                raise InvalidConfigError(f"probs[{i}] = {p!r} is not >= 0")
        total = sum(probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise InvalidConfigError(f"probs sum to {total!r}, expected 1 within {PROB_SUM_TOL}")
        object.__setattr__(self, "probs", tuple(p / total for p in probs))
        if self.variant not in (VARIANT_STRICT, VARIANT_AT_LEAST):
            raise InvalidConfigError(f"unknown variant {self.variant!r}")
        if self.variant == VARIANT_AT_LEAST and self.slow_type is None:
            raise InvalidConfigError("variant 'at_least' requires slow_type")
        if self.slow_type is not None and not 0 <= self.slow_type < len(probs):
            raise InvalidConfigError(
                f"slow_type {self.slow_type} out of range for {len(probs)} types"
            )

    @property
    def num_types(self) -> int:
        return len(self.probs)


def _check_pool_config(pool: CandidatePool, config: BlendConfig, k: int) -> None:
    if k < 1:
        raise InvalidConfigError(f"k must be >= 1, got {k}")
    if pool.num_types != config.num_types:
        raise InvalidConfigError(
            f"config declares {config.num_types} types but pool has {pool.num_types}"
        )
    if pool.size == 0:
        raise EmptyPoolError("cannot blend from an empty pool")


def blend_slate(pool: CandidatePool, config: BlendConfig, k: int, rng: SplitMix64) -> Slate:
    """Fill min(k, n) positions by repeated type sampling.

    Each position consumes exactly one uniform: the type is picked by
    inverse CDF over type ids in ascending order, using the probabilities
    renormalized over the currently non-empty pools. If every remaining
    non-empty type has probability zero, the draw falls back to uniform
    over the non-empty types so the slate still fills.
    """
    _check_pool_config(pool, config, k)
    heads = [0] * pool.num_types  # next unconsumed index per type
    remaining = pool.size
    take = min(k, remaining)
    entries = []
    for pos in range(1, take + 1):
        active = [t for t in range(pool.num_types) if heads[t] < len(pool.by_type[t])]
        mass = sum(config.probs[t] for t in active)
        if mass > 0.0:
            weights = [config.probs[t] / mass for t in active]
        else:
            weights = [1.0 / len(active)] * len(active)
        u = rng.uniform()
        chosen = active[-1]
        acc = 0.0
        for t, w in zip(active, weights):
            acc += w
            if u < acc:
                chosen = t
                break
        cand = pool.by_type[chosen][heads[chosen]]
        heads[chosen] += 1
        entries.append(SlateEntry(position=pos, candidate=cand, sampled_type=chosen))
    return Slate(entries=tuple(entries), k=k)


def blend_slate_at_least(
    pool: CandidatePool, config: BlendConfig, k: int, rng: SplitMix64
) -> Slate:
    """Blend only when the sorted baseline under-exposes the slow type.

    If the score-sorted slate already gives the slow type at least
    probs[slow_type] of its positions, it is returned verbatim and the RNG
    is not advanced; otherwise this is exactly blend_slate.
    """
    if config.variant != VARIANT_AT_LEAST:
        raise InvalidConfigError("blend_slate_at_least requires variant 'at_least'")
    _check_pool_config(pool, config, k)
    baseline = sort_rank(pool, k)
    slow = config.slow_type
    slow_count = sum(1 for e in baseline.entries if e.candidate.content_type == slow)
    if slow_count / len(baseline) >= config.probs[slow]:
        return baseline
    return blend_slate(pool, config, k, rng)


def realized_exposure(slate: Slate, num_types: int) -> list[float]:
    """Per-type fraction of slate positions; sums to 1."""
    if len(slate) == 0:
        raise InvalidConfigError("cannot compute exposure of an empty slate")
    counts = [0] * num_types
    for e in slate.entries:
        t = e.candidate.content_type
        if not 0 <= t < num_types:
            raise InvalidConfigError(
                f"slate entry has content_type {t}, expected 0..{num_types - 1}"
            )
        counts[t] += 1
    n = len(slate)
    return [c / n for c in counts]
