"""Positional inverse-propensity-scoring evaluation of a target blending policy.

Each logged impression is reweighted by the ratio of the target policy's
closed-form placement propensity to the propensity recorded at logging
time. The estimate is the mean reweighted reward per impression; the
effective sample size (sum of weights squared over sum of squared
weights) is reported alongside as the usual variance health check.

Logs carry their logging propensities rather than having them recomputed
here: that matches how production logs work and avoids silently drifting
if the logging configuration is misremembered later. Per-position
reweighting is used because the placement propensities are positional;
joint whole-slate weights would need slate-level probabilities this
package does not model.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .blend import BlendConfig
from .core import ParseError, RankingError
from .propensity import closed_form_propensities


class InvalidLogError(RankingError):
    """A logged impression fails schema or range validation."""


class SupportViolationError(RankingError):
    """A logged impression cannot be reweighted (zero logging propensity)."""


@dataclass(frozen=True, slots=True)
class ImpressionLog:
    """One logged slate position.

    pool_sizes describes the candidate set the logging policy ranked
    (per-type counts); the shown item is identified by its content type
    and within-type rank m (1-based), the slot by position j (1-based).
    """

    pool_sizes: tuple[int, ...]
    content_type: int
    within_type_rank: int  # m
    position: int  # j
    reward: float
    logging_propensity: float


@dataclass(frozen=True)
class IpsResult:
    value: float
    effective_sample_size: float
    n: int


def _check_log(log: ImpressionLog, index: int, k: int) -> None:
    where = f"log row {index}"
    if len(log.pool_sizes) < 1 or any(s < 0 for s in log.pool_sizes):
        raise InvalidLogError(f"{where}: invalid pool_sizes {log.pool_sizes!r}")
    if not 0 <= log.content_type < len(log.pool_sizes):
        raise InvalidLogError(f"{where}: content type {log.content_type} out of range")
    if not 1 <= log.within_type_rank <= log.pool_sizes[log.content_type]:
        raise InvalidLogError(
            f"{where}: within-type rank {log.within_type_rank} out of range for "
            f"pool size {log.pool_sizes[log.content_type]}"
        )
    if not 1 <= log.position <= k:
        raise InvalidLogError(f"{where}: position {log.position} out of range 1..{k}")
    if not math.isfinite(log.reward) or log.reward < 0:
        raise InvalidLogError(f"{where}: reward {log.reward!r} must be finite and >= 0")
    if not math.isfinite(log.logging_propensity) or log.logging_propensity > 1.0:
        raise InvalidLogError(f"{where}: logging propensity {log.logging_propensity!r} > 1")
    if log.logging_propensity <= 0.0:
        raise SupportViolationError(
            f"{where}: logging propensity {log.logging_propensity!r} is not positive; "
            "the row cannot be reweighted"
        )


def ips_estimate(
    logs: Sequence[ImpressionLog],
    target: BlendConfig,
    k: int,
    clip: float | None = None,
) -> IpsResult:
    """Mean reward per impression under the target config, from logged data.

    value = (1/N) sum_i reward_i * targetP_i / loggingP_i with target
    propensities from the closed form. ``clip`` optionally caps the
    weights (this introduces bias and is off by default).
    """
    if not logs:
        raise InvalidLogError("no log rows given")
    if clip is not None and clip <= 0:
        raise InvalidLogError(f"clip must be positive, got {clip!r}")

    matrices: dict[tuple[int, ...], object] = {}
    total = 0.0
    w_sum = 0.0
    w_sq_sum = 0.0
    for i, log in enumerate(logs):
        _check_log(log, i, k)
        key = tuple(log.pool_sizes)
        matrix = matrices.get(key)
        if matrix is None:
            matrix = closed_form_propensities(key, target, k)
            if not matrix.exact:
                warnings.warn(
                    f"target propensities for pool sizes {key} are approximate: "
                    "some pool can exhaust within the slate",
                    stacklevel=2,
                )
            matrices[key] = matrix
        target_p = matrix.propensity(log.content_type, log.within_type_rank, log.position)
        w = target_p / log.logging_propensity
        if clip is not None:
            w = min(w, clip)
        total += w * log.reward
        w_sum += w
        w_sq_sum += w * w

    n = len(logs)
    ess = (w_sum * w_sum / w_sq_sum) if w_sq_sum > 0 else 0.0
    return IpsResult(value=total / n, effective_sample_size=ess, n=n)


def read_logs_jsonl(path: str) -> list[ImpressionLog]:
    """Parse impression logs, one JSON object per line.

    Schema: {"pool_sizes": [int...], "type": int, "m": int, "j": int,
    "reward": number, "logging_propensity": number}. A rejected line
    aborts with its line number.
    """
    logs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                logs.append(
                    ImpressionLog(
                        pool_sizes=tuple(int(s) for s in rec["pool_sizes"]),
                        content_type=int(rec["type"]),
                        within_type_rank=int(rec["m"]),
                        position=int(rec["j"]),
                        reward=float(rec["reward"]),
                        logging_propensity=float(rec["logging_propensity"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad log record: {exc}") from exc
    return logs


def write_logs_jsonl(logs: Sequence[ImpressionLog], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(
                json.dumps(
                    {
                        "pool_sizes": list(log.pool_sizes),
                        "type": log.content_type,
                        "m": log.within_type_rank,
                        "j": log.position,
                        "reward": log.reward,
                        "logging_propensity": log.logging_propensity,
                    }
                )
                + "\n"
            )
