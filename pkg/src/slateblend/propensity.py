"""Placement-probability matrices for the blending policy.

Under strict blending, the m-th ranked item of type c lands at position j
exactly when the first j-1 type draws contain m-1 hits on c and the j-th
draw hits c, so its propensity factorizes into a binomial pmf times p_c.
That expression ignores pool exhaustion: it is exact only while no pool
can run dry within the first k draws, and the matrix carries an ``exact``
flag so downstream consumers cannot silently misreport propensities.

A Monte Carlo estimator over real blend_slate draws is provided as the
independent check (and as the fallback when exhaustion makes the closed
form approximate).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .blend import VARIANT_STRICT, BlendConfig, blend_slate
from .core import CandidatePool, InvalidConfigError
from .rng import SplitMix64


@dataclass(frozen=True)
class PropensityMatrix:
    """Candidates-by-positions placement probabilities.

    Rows follow the flattened pool order (type ascending, then within-type
    rank by descending score); columns are positions 1..k. ``exact`` is
    True only for closed-form matrices whose no-exhaustion precondition
    holds; Monte Carlo estimates always carry False.
    """

    matrix: np.ndarray  # shape (n_candidates, k)
    row_types: np.ndarray  # content type per row
    row_ranks: np.ndarray  # within-type rank m (1-based) per row
    exact: bool

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def row_of(self, content_type: int, within_type_rank: int) -> int:
        """Row index of the m-th ranked item of a type (m is 1-based)."""
        # Rows are sorted by type, then rank 1..size, so the row is the
        # type's first row offset plus m-1.
        base = int(np.searchsorted(self.row_types, content_type, side="left"))
        row = base + within_type_rank - 1
        if (
            within_type_rank < 1
            or row >= self.matrix.shape[0]
            or self.row_types[row] != content_type
            or self.row_ranks[row] != within_type_rank
        ):
            raise InvalidConfigError(
                f"no row for type {content_type}, within-type rank {within_type_rank}"
            )
        return row

    def propensity(self, content_type: int, within_type_rank: int, position: int) -> float:
        """P[the m-th item of a type lands at a 1-based position]."""
        if not 1 <= position <= self.k:
            raise InvalidConfigError(f"position {position} out of range 1..{self.k}")
        return float(self.matrix[self.row_of(content_type, within_type_rank), position - 1])


def _row_layout(pool_sizes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    row_types = np.concatenate(
        [np.full(size, t, dtype=np.intp) for t, size in enumerate(pool_sizes)]
    ) if sum(pool_sizes) else np.empty(0, dtype=np.intp)
    row_ranks = np.concatenate(
        [np.arange(1, size + 1, dtype=np.intp) for size in pool_sizes]
    ) if sum(pool_sizes) else np.empty(0, dtype=np.intp)
    return row_types, row_ranks


def closed_form_propensities(
    pool_sizes: Sequence[int], config: BlendConfig, k: int
) -> PropensityMatrix:
    """Closed-form matrix for the strict blending policy.

    Entry for the m-th item of type c at position j is
    BinomialPmf(m-1; j-1, p_c) * p_c, which is exactly 0 for j < m. The
    binomial pmf comes from scipy (log-gamma based), so large k stays
    numerically stable.
    """
    if config.variant != VARIANT_STRICT:
        raise InvalidConfigError("closed-form propensities are defined for the strict variant")
    if k < 1:
        raise InvalidConfigError(f"k must be >= 1, got {k}")
    pool_sizes = [int(s) for s in pool_sizes]
    if len(pool_sizes) != config.num_types:
        raise InvalidConfigError(
            f"got {len(pool_sizes)} pool sizes for {config.num_types} types"
        )
    if any(s < 0 for s in pool_sizes):
        raise InvalidConfigError("pool sizes must be >= 0")

    row_types, row_ranks = _row_layout(pool_sizes)
    blocks = []
    for t, size in enumerate(pool_sizes):
        if size == 0:
            continue
        p = config.probs[t]
        m_minus_1 = np.arange(size, dtype=np.float64)[:, None]
        j_minus_1 = np.arange(k, dtype=np.float64)[None, :]
        blocks.append(stats.binom.pmf(m_minus_1, j_minus_1, p) * p)
    matrix = np.vstack(blocks) if blocks else np.empty((0, k), dtype=np.float64)
    exact = all(
        size >= k for t, size in enumerate(pool_sizes) if config.probs[t] > 0.0
    )
    return PropensityMatrix(matrix=matrix, row_types=row_types, row_ranks=row_ranks, exact=exact)


def monte_carlo_propensities(
    pool: CandidatePool,
    config: BlendConfig,
    k: int,
    samples: int,
    rng: SplitMix64,
    workers: int = 1,
) -> PropensityMatrix:
    """Empirical placement frequencies over independent blend_slate draws.

    With workers > 1 the samples are split into deterministic partitions
    whose streams are keyed by partition index, so the result does not
    depend on scheduling; partial matrices merge by sample-weighted
    average.
    """
    if samples < 1:
        raise InvalidConfigError(f"samples must be >= 1, got {samples}")
    if workers < 1:
        raise InvalidConfigError(f"workers must be >= 1, got {workers}")

    row_types, row_ranks = _row_layout(pool.type_sizes())
    row_of_id = {c.id: i for i, c in enumerate(pool.flatten())}

    def run_partition(part_rng: SplitMix64, part_samples: int) -> np.ndarray:
        counts = np.zeros((pool.size, k), dtype=np.int64)
        for _ in range(part_samples):
            slate = blend_slate(pool, config, k, part_rng)
            for i, entry in enumerate(slate.entries):
                counts[row_of_id[entry.candidate.id], i] += 1
        return counts

    per_part = [samples // workers] * workers
    for i in range(samples % workers):
        per_part[i] += 1
    parts = [(rng.spawn(i), n) for i, n in enumerate(per_part) if n > 0]

    if len(parts) == 1:
        counts = run_partition(*parts[0])
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            results = list(pool_exec.map(lambda a: run_partition(*a), parts))
        counts = np.sum(results, axis=0)

    matrix = counts / float(samples)
    return PropensityMatrix(matrix=matrix, row_types=row_types, row_ranks=row_ranks, exact=False)
