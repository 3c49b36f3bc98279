"""Ranking policies as stateless scikit-learn style estimators.

Every policy is configured in ``__init__`` (so ``get_params`` /
``set_params`` / ``clone`` work for sweeps and pipelines), validates on
use, and exposes two call surfaces:

* ``rank(X, rng=None)`` returns a full :class:`~slateblend.core.Slate`
  with per-position provenance; X is a candidate list or a prebuilt pool.
* ``transform(X)`` returns the re-ranked (truncated) candidate list, so a
  policy drops into sklearn-style composition.

``fit`` is a no-op that validates parameters and returns self: these
policies learn nothing, they post-process scores produced upstream.
"""

from __future__ import annotations

from typing import Sequence

from sklearn.base import BaseEstimator

from .blend import (
    VARIANT_AT_LEAST,
    VARIANT_STRICT,
    BlendConfig,
    blend_slate,
    blend_slate_at_least,
)
from .core import (
    Candidate,
    CandidatePool,
    InvalidConfigError,
    Slate,
    SlateEntry,
    build_pool,
    sort_rank,
)
from .mmr import mmr_rank
from .rng import SplitMix64, entropy_seed


class SlateRanker(BaseEstimator):
    """Base class for slate-producing rankers."""

    k: int

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def _check_params(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise InvalidConfigError(f"k must be an integer >= 1, got {self.k!r}")

    def _num_types(self, candidates: Sequence[Candidate]) -> int:
        if not candidates:
            return 1
        return max(c.content_type for c in candidates) + 1

    def _as_pool(self, X) -> CandidatePool:
        if isinstance(X, CandidatePool):
            return X
        return build_pool(X, self._num_types(X))

    def rank(self, X, rng: SplitMix64 | None = None) -> Slate:
        self._check_params()
        return self._rank_pool(self._as_pool(X), rng)

    def transform(self, X) -> list[Candidate]:
        return [e.candidate for e in self.rank(X).entries]

    def _rank_pool(self, pool: CandidatePool, rng: SplitMix64 | None) -> Slate:
        raise NotImplementedError


class SortRanker(SlateRanker):
    """Plain deterministic sort by (score desc, id asc)."""

    def __init__(self, k: int = 10):
        self.k = k

    def _rank_pool(self, pool: CandidatePool, rng: SplitMix64 | None) -> Slate:
        return sort_rank(pool, self.k)


class MultinomialBlender(SlateRanker):
    """Sampling blender with per-type exposure budgets.

    ``probs[c]`` is the expected fraction of slate positions given to type
    c. ``variant="at_least"`` only blends when the sorted baseline gives
    ``slow_type`` less than its budget. ``seed`` makes ``rank`` without an
    explicit rng reproducible; each such call restarts the stream.
    """

    def __init__(
        self,
        probs: Sequence[float] = (0.5, 0.5),
        k: int = 10,
        variant: str = VARIANT_STRICT,
        slow_type: int | None = None,
        seed: int | None = None,
    ):
        self.probs = probs
        self.k = k
        self.variant = variant
        self.slow_type = slow_type
        self.seed = seed

    def _check_params(self) -> None:
        super()._check_params()
        self.as_blend_config()

    def as_blend_config(self) -> BlendConfig:
        return BlendConfig(probs=tuple(self.probs), variant=self.variant, slow_type=self.slow_type)

    def _num_types(self, candidates: Sequence[Candidate]) -> int:
        return len(self.probs)

    def _rank_pool(self, pool: CandidatePool, rng: SplitMix64 | None) -> Slate:
        config = self.as_blend_config()
        if rng is None:
            rng = SplitMix64(self.seed if self.seed is not None else entropy_seed())
        if config.variant == VARIANT_AT_LEAST:
            return blend_slate_at_least(pool, config, self.k, rng)
        return blend_slate(pool, config, self.k, rng)


class MmrReranker(SlateRanker):
    """Greedy relevance-vs-type-concentration re-ranking.

    ``lam=1`` is plain sorting; lower values spread content types. The
    penalty is scale-free while scores are not, so the lam that yields a
    given exposure depends on the score distribution.
    """

    def __init__(self, lam: float = 0.5, k: int = 10):
        self.lam = lam
        self.k = k

    def _check_params(self) -> None:
        super()._check_params()
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidConfigError(f"lam must be in [0, 1], got {self.lam!r}")

    def _rank_pool(self, pool: CandidatePool, rng: SplitMix64 | None) -> Slate:
        return mmr_rank(pool, self.lam, self.k)


class PinnedSlotRanker(SlateRanker):
    """Sorted ranking with one slot reserved for the slow type.

    Approximates hand-curated override rules: if the sorted top-k already
    shows a slow-type item at or above ``pin_position``, it is returned
    unchanged; otherwise the best slow-type candidate is inserted at
    ``pin_position`` (1-based) and the tail shifts down. A rough stand-in
    for production override lifecycles, not a faithful model of them.
    """

    def __init__(self, slow_type: int = 1, pin_position: int = 3, k: int = 10):
        self.slow_type = slow_type
        self.pin_position = pin_position
        self.k = k

    def _check_params(self) -> None:
        super()._check_params()
        if not isinstance(self.pin_position, int) or self.pin_position < 1:
            raise InvalidConfigError(f"pin_position must be >= 1, got {self.pin_position!r}")
        if not isinstance(self.slow_type, int) or self.slow_type < 0:
            raise InvalidConfigError(f"slow_type must be >= 0, got {self.slow_type!r}")

    def _rank_pool(self, pool: CandidatePool, rng: SplitMix64 | None) -> Slate:
        baseline = sort_rank(pool, self.k)
        pin = min(self.pin_position, len(baseline))
        if pin == 0:
            return baseline
        has_early_slow = any(
            e.candidate.content_type == self.slow_type for e in baseline.entries[:pin]
        )
        if has_early_slow:
            return baseline
        slow_pool = (
            pool.by_type[self.slow_type] if self.slow_type < pool.num_types else ()
        )
        if not slow_pool:
            return baseline
        best_slow = slow_pool[0]
        kept = [e.candidate for e in baseline.entries if e.candidate.id != best_slow.id]
        ordered = kept[: pin - 1] + [best_slow] + kept[pin - 1 :]
        ordered = ordered[: min(self.k, pool.size)]
        entries = tuple(
            SlateEntry(position=i, candidate=c, sampled_type=None)
            for i, c in enumerate(ordered, start=1)
        )
        return Slate(entries=entries, k=self.k)


POLICY_KINDS = ("sort", "mb", "mmr", "pinned")


def policy_from_spec(spec: dict, *, k: int, default_slow_type: int | None = None):
    """Build a (name, ranker) pair from a policy spec dict.

    Used by the simulator config file and the CLI. ``kind`` selects the
    policy; remaining keys are its parameters. ``k`` comes from the
    caller; ``slow_type`` falls back to ``default_slow_type`` where the
    policy needs one and the spec omits it.
    """
    if "kind" not in spec:
        raise InvalidConfigError(f"policy spec missing 'kind': {spec!r}")
    kind = spec["kind"]
    name = spec.get("name", kind)
    if kind == "sort":
        return name, SortRanker(k=k)
    if kind == "mb":
        if "probs" not in spec:
            raise InvalidConfigError(f"policy {name!r}: 'mb' requires 'probs'")
        variant = spec.get("variant", VARIANT_STRICT)
        slow_type = spec.get("slow_type")
        if slow_type is None and variant == VARIANT_AT_LEAST:
            slow_type = default_slow_type
        return name, MultinomialBlender(
            probs=tuple(float(p) for p in spec["probs"]),
            k=k,
            variant=variant,
            slow_type=slow_type,
        )
    if kind == "mmr":
        if "lam" not in spec:
            raise InvalidConfigError(f"policy {name!r}: 'mmr' requires 'lam'")
        return name, MmrReranker(lam=float(spec["lam"]), k=k)
    if kind == "pinned":
        slow_type = spec.get("slow_type", default_slow_type)
        if slow_type is None:
            raise InvalidConfigError(f"policy {name!r}: 'pinned' requires 'slow_type'")
        return name, PinnedSlotRanker(
            slow_type=int(slow_type), pin_position=int(spec.get("pin_position", 3)), k=k
        )
    raise InvalidConfigError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
