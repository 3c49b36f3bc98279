"""Greedy re-ranking that trades relevance against content-type concentration.

Each position after the first maximizes

    lam * score  -  (1 - lam) * share_of_partial_slate_with_same_type

so lam = 1 reduces to plain score sorting and small lam spreads types out.
Scores enter raw: the penalty term lives in [0, 1] while scores carry
whatever scale the upstream model produced, so the lam needed for a given
exposure depends on that scale (and shifts whenever the scorer is
retrained). That is the operational cost of this policy; the blending
policy in :mod:`slateblend.blend` avoids it.
"""

from __future__ import annotations

import numpy as np

from .core import (
    Candidate,
    CandidatePool,
    EmptyPoolError,
    InvalidConfigError,
    Slate,
    SlateEntry,
    _sort_key,
)


def type_similarity(candidate: Candidate, partial: Slate) -> float:
    """Fraction of the partial slate sharing the candidate's content type.

    Defined as 0 for an empty partial slate (the first pick is forced to
    the highest-relevance item anyway).
    """
    if len(partial) == 0:
        return 0.0
    same = sum(1 for e in partial.entries if e.candidate.content_type == candidate.content_type)
    return same / len(partial)


def _check_lam(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InvalidConfigError(f"lam must be in [0, 1], got {lam!r}")


def mmr_rank(pool: CandidatePool, lam: float, k: int) -> Slate:
    """Deterministic greedy re-ranking, truncated to min(k, n).

    Position 1 is the global score argmax; ties break by (raw score desc,
    id asc) everywhere. The similarity term only depends on per-type
    counts in the partial slate, so it is tracked as a C-length counter
    instead of rescanning the slate.
    """
    _check_lam(lam)
    if k < 1:
        raise InvalidConfigError(f"k must be >= 1, got {k}")
    if pool.size == 0:
        raise EmptyPoolError("cannot rank an empty pool")

    # Flat arrays pre-sorted by the global tie-break order: the first
    # argmax hit is then automatically the tie-break winner.
    flat = sorted(pool.flatten(), key=_sort_key)
    scores = np.array([c.score for c in flat], dtype=np.float64)
    types = np.array([c.content_type for c in flat], dtype=np.intp)
    alive = np.ones(len(flat), dtype=bool)
    counts = np.zeros(pool.num_types, dtype=np.float64)

    take = min(k, len(flat))
    entries = [SlateEntry(position=1, candidate=flat[0], sampled_type=None)]
    alive[0] = False
    counts[types[0]] += 1.0

    for pos in range(2, take + 1):
        marginal = lam * scores - (1.0 - lam) * (counts[types] / (pos - 1))
        marginal[~alive] = -np.inf
        idx = int(np.argmax(marginal))
        alive[idx] = False
        counts[types[idx]] += 1.0
        entries.append(SlateEntry(position=pos, candidate=flat[idx], sampled_type=None))
    return Slate(entries=tuple(entries), k=k)
