"""Core domain types shared by every ranking policy.

Candidates carry an opaque id, a content type (dense 0-based index), and a
finite relevance score. A CandidatePool groups them per type, sorted by
descending score; a Slate is the ordered output of a policy with optional
per-position provenance (which type was sampled to fill it).

Tie-breaking is fixed globally as (score descending, id ascending) so that
every policy in the package is deterministic and golden-testable.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence


class RankingError(Exception):
    """Base class for all slateblend errors."""


class DuplicateIdError(RankingError):
    """Two candidates in the same request share an id."""


class UnknownContentTypeError(RankingError):
    """A candidate's content type index is outside 0..num_types-1."""


class NonFiniteScoreError(RankingError):
    """A candidate score is NaN or infinite."""


class EmptyPoolError(RankingError):
    """A ranking operation was asked to fill a slate from an empty pool."""


class InvalidConfigError(RankingError):
    """A policy or simulator configuration failed validation."""


class ParseError(RankingError):
    """An input file was rejected; the message carries the line number."""


@dataclass(frozen=True, slots=True)
class Candidate:
    """One rankable item."""

    id: str
    content_type: int
    score: float


def _sort_key(c: Candidate) -> tuple[float, str]:
    return (-c.score, c.id)


@dataclass(frozen=True, slots=True)
class CandidatePool:
    """Per-content-type candidate lists, each sorted by (score desc, id asc).

    Construct via :func:`build_pool`; direct construction skips validation.
    """

    by_type: tuple[tuple[Candidate, ...], ...]

    @property
    def num_types(self) -> int:
        return len(self.by_type)

    @property
    def size(self) -> int:
        return sum(len(lst) for lst in self.by_type)

    def type_sizes(self) -> list[int]:
        return [len(lst) for lst in self.by_type]

    def flatten(self) -> list[Candidate]:
        """All candidates, type ascending then score descending."""
        return [c for lst in self.by_type for c in lst]


@dataclass(frozen=True, slots=True)
class SlateEntry:
    position: int  # 1-based
    candidate: Candidate
    sampled_type: int | None  # set by sampling policies, None otherwise


@dataclass(frozen=True, slots=True)
class Slate:
    """Ordered ranking of length min(k, pool size)."""

    entries: tuple[SlateEntry, ...]
    k: int  # requested length

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.candidate.id for e in self.entries]

    def content_types(self) -> list[int]:
        return [e.candidate.content_type for e in self.entries]


def check_candidates(candidates: Sequence[Candidate], num_types: int) -> None:
    """Validate id uniqueness, type range, and score finiteness."""
    if num_types < 1:
        raise InvalidConfigError(f"num_types must be >= 1, got {num_types}")
    seen: set[str] = set()
    for c in candidates:
        if c.id in seen:
            raise DuplicateIdError(f"duplicate candidate id {c.id!r}")
        seen.add(c.id)
        if not 0 <= c.content_type < num_types:
            raise UnknownContentTypeError(
                f"candidate {c.id!r} has content_type {c.content_type}, "
                f"expected 0..{num_types - 1}"
            )
        if not math.isfinite(c.score):
            raise NonFiniteScoreError(f"candidate {c.id!r} has non-finite score {c.score!r}")


def build_pool(candidates: Iterable[Candidate], num_types: int) -> CandidatePool:
    """Group candidates per type, sorted by (score desc, id asc)."""
    cand_list = list(candidates)
    check_candidates(cand_list, num_types)
    buckets: list[list[Candidate]] = [[] for _ in range(num_types)]
    for c in cand_list:
        buckets[c.content_type].append(c)
    for bucket in buckets:
        bucket.sort(key=_sort_key)
    return CandidatePool(by_type=tuple(tuple(b) for b in buckets))


def sort_rank(pool: CandidatePool, k: int) -> Slate:
    """Deterministic score-sorted ranking across all types, truncated to min(k, n).

    Merges the per-type sorted lists rather than re-sorting, so the global
    brute-force sort stays available as an independent check.
    """
    if k < 1:
        raise InvalidConfigError(f"k must be >= 1, got {k}")
    merged = heapq.merge(*pool.by_type, key=_sort_key)
    entries = []
    for pos, cand in enumerate(merged, start=1):
        if pos > k:
            break
        entries.append(SlateEntry(position=pos, candidate=cand, sampled_type=None))
    return Slate(entries=tuple(entries), k=k)


def read_candidates_jsonl(path: str) -> list[Candidate]:
    """Parse one candidate per line: {"id": str, "content_type": int, "score": number}.

    Any rejected line aborts the whole read with its line number.
    """
    candidates = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            candidates.append(_candidate_from_record(rec, f"{path}:{lineno}"))
    return candidates


def _candidate_from_record(rec: object, where: str) -> Candidate:
    if not isinstance(rec, dict):
        raise ParseError(f"{where}: expected a JSON object, got {type(rec).__name__}")
    try:
        cid, ctype, score = rec["id"], rec["content_type"], rec["score"]
    except KeyError as exc:
        raise ParseError(f"{where}: missing field {exc.args[0]!r}") from exc
    if not isinstance(cid, str):
        raise ParseError(f"{where}: 'id' must be a string")
    if not isinstance(ctype, int) or isinstance(ctype, bool) or ctype < 0:
        raise ParseError(f"{where}: 'content_type' must be a non-negative integer")
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not math.isfinite(score):
        raise ParseError(f"{where}: 'score' must be a finite number")
    return Candidate(id=cid, content_type=ctype, score=float(score))
