"""Synthetic fast/slow content environment for comparing slate policies.

The environment generates a fixed item universe (per-item base quality), a
population of users with per-type affinities, and noisy per-user scores
that mimic a click-trained ranker: each score tracks the item's expected
click rate, so the low-click ("slow") type is score-disadvantaged exactly
the way click-optimizing rankers disadvantage it in production. Clicks
follow a position-based model: examination decays geometrically with
position, and a click requires examination plus a Bernoulli on the user's
true item click probability.

All numeric parameters here (click rates, engagement weights, affinity
spread) are invented simulation defaults chosen to make the exposure /
engagement trade-off visible at small scale; they are not measurements.

Determinism: the item universe, each user, and each (user, slate) session
get their own SplitMix64 streams keyed by index, never by scheduling, so
results are identical for any worker count. Session streams are shared
across policies: policies draw from the stream first (sampling policies
only), then user behavior consumes the rest. Deterministic policies that
produce the same slate therefore produce byte-identical sessions, and
comparisons between policies are paired through a common universe and
user population.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .blend import VARIANT_STRICT
from .core import Candidate, CandidatePool, InvalidConfigError, Slate, build_pool
from .ope import ImpressionLog
from .policies import MmrReranker, MultinomialBlender, SlateRanker
from .propensity import PropensityMatrix, closed_form_propensities
from .rng import SplitMix64, derive_seed

# Stream namespaces under the master seed.
_STREAM_ITEMS = 1
_STREAM_USER = 2
_STREAM_SESSION = 3


@dataclass(frozen=True)
class SimConfig:
    """Environment parameters; defaults encode one fast and one slow type.

    The slow type clicks rarely but each click carries a large engagement
    weight (long-form content); ``base_click`` and ``engagement_weight``
    are indexed by content type. ``universe_seed`` pins the item universe
    independently of ``seed`` so different user populations can share
    items; None means "derive from seed".
    """

    num_types: int = 2
    users: int = 2000
    slates_per_user: int = 3
    k: int = 10
    pool_size_per_type: int = 25
    examination_decay: float = 0.85
    base_click: tuple[float, ...] = (0.25, 0.08)
    engagement_weight: tuple[float, ...] = (1.0, 8.0)
    affinity_spread: float = 0.7
    score_noise: float = 0.02
    score_scale: float = 1.0
    slow_type: int = 1
    seed: int = 7
    universe_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "base_click", tuple(float(p) for p in self.base_click))
        object.__setattr__(
            self, "engagement_weight", tuple(float(w) for w in self.engagement_weight)
        )
        if self.num_types < 1:
            raise InvalidConfigError("num_types must be >= 1")
        for name in ("users", "slates_per_user", "k", "pool_size_per_type"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1")
        if self.k > self.pool_size_per_type * self.num_types:
            raise InvalidConfigError("k exceeds the total candidate pool")
        if not 0.0 < self.examination_decay <= 1.0:
            raise InvalidConfigError("examination_decay must be in (0, 1]")
        if len(self.base_click) != self.num_types:
            raise InvalidConfigError("base_click needs one entry per type")
        if any(not 0.0 <= p <= 1.0 for p in self.base_click):
            raise InvalidConfigError("base_click entries must be in [0, 1]")
        if len(self.engagement_weight) != self.num_types:
            raise InvalidConfigError("engagement_weight needs one entry per type")
        if any(w < 0 for w in self.engagement_weight):
            raise InvalidConfigError("engagement_weight entries must be >= 0")
        if self.affinity_spread < 0:
            raise InvalidConfigError("affinity_spread must be >= 0")
        if self.score_noise < 0:
            raise InvalidConfigError("score_noise must be >= 0")
        if self.score_scale <= 0:
            raise InvalidConfigError("score_scale must be > 0")
        if not 0 <= self.slow_type < self.num_types:
            raise InvalidConfigError("slow_type out of range")

    def to_dict(self) -> dict:
        return {
            "num_types": self.num_types,
            "users": self.users,
            "slates_per_user": self.slates_per_user,
            "k": self.k,
            "pool_size_per_type": self.pool_size_per_type,
            "examination_decay": self.examination_decay,
            "base_click": list(self.base_click),
            "engagement_weight": list(self.engagement_weight),
            "affinity_spread": self.affinity_spread,
            "score_noise": self.score_noise,
            "score_scale": self.score_scale,
            "slow_type": self.slow_type,
            "seed": self.seed,
            "universe_seed": self.universe_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {key: value for key, value in data.items() if key in known}
        return cls(**kwargs)


@dataclass(frozen=True)
class ItemUniverse:
    """Fixed per-item base qualities, shared by every user and policy."""

    qualities: tuple[tuple[float, ...], ...]  # [type][item]
    ids: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class UserDraw:
    """One synthetic user: affinities, scored pool, and true click model."""

    index: int
    affinity: tuple[float, ...]
    pool: CandidatePool
    click_prob: dict[str, float]  # candidate id -> P(click | examined)
    within_type_rank: dict[str, int]  # candidate id -> m (1-based)


@dataclass(frozen=True, slots=True)
class SessionImpression:
    position: int
    candidate_id: str
    content_type: int
    within_type_rank: int
    examined: bool
    clicked: bool
    reward: float
    logging_propensity: float | None


@dataclass(frozen=True)
class SessionLog:
    user_index: int
    slate_index: int
    slate: Slate
    impressions: tuple[SessionImpression, ...]


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated per-policy outcome of one experiment."""

    policy: str
    users: int
    impressions: int
    clicks: int
    exposure: tuple[float, ...]
    ctr_per_type: tuple[float, ...]
    total_engagement: float
    slow_engagement: float
    new_slow_engagers: int

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "users": self.users,
            "impressions": self.impressions,
            "clicks": self.clicks,
            "exposure": list(self.exposure),
            "ctr_per_type": list(self.ctr_per_type),
            "total_engagement": self.total_engagement,
            "slow_engagement": self.slow_engagement,
            "new_slow_engagers": self.new_slow_engagers,
        }


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    slow_exposure: float
    overall_engagement: float


def _universe_seed(config: SimConfig) -> int:
    return config.universe_seed if config.universe_seed is not None else config.seed


def generate_universe(config: SimConfig) -> ItemUniverse:
    rng = SplitMix64(derive_seed(_universe_seed(config), _STREAM_ITEMS))
    qualities = []
    ids = []
    for t in range(config.num_types):
        qualities.append(tuple(rng.uniform() for _ in range(config.pool_size_per_type)))
        ids.append(tuple(f"t{t}-{i:04d}" for i in range(config.pool_size_per_type)))
    return ItemUniverse(qualities=tuple(qualities), ids=tuple(ids))


def draw_user(config: SimConfig, universe: ItemUniverse, index: int) -> UserDraw:
    """Draw one user: per-type affinity, then per-item score noise.

    Scores mimic a click-calibrated ranker: score tracks
    base_click * affinity * quality (the item's true click rate), plus
    noise, times an overall scale. The true click probability excludes
    both noise and scale, so rescaling the scorer never changes behavior.
    """
    rng = SplitMix64(derive_seed(config.seed, _STREAM_USER, index))
    affinity = tuple(
        math.exp(config.affinity_spread * (2.0 * rng.uniform() - 1.0))
        for _ in range(config.num_types)
    )
    candidates = []
    click_prob: dict[str, float] = {}
    for t in range(config.num_types):
        for i in range(config.pool_size_per_type):
            rate = config.base_click[t] * affinity[t] * universe.qualities[t][i]
            noise = config.score_noise * (2.0 * rng.uniform() - 1.0)
            cid = universe.ids[t][i]
            candidates.append(
                Candidate(id=cid, content_type=t, score=config.score_scale * (rate + noise))
            )
            click_prob[cid] = min(1.0, rate)
    pool = build_pool(candidates, config.num_types)
    within_type_rank = {
        c.id: m for lst in pool.by_type for m, c in enumerate(lst, start=1)
    }
    return UserDraw(
        index=index,
        affinity=affinity,
        pool=pool,
        click_prob=click_prob,
        within_type_rank=within_type_rank,
    )


def session_rng(config: SimConfig, user_index: int, slate_index: int) -> SplitMix64:
    """Stream for one (user, slate) session, shared by policy and behavior.

    Keyed by user and slate only: policies that sample consume the head of
    the stream, behavior the rest, so deterministic policies producing the
    same slate produce identical sessions.
    """
    return SplitMix64(derive_seed(config.seed, _STREAM_SESSION, user_index, slate_index))


def simulate_session(
    user: UserDraw,
    policy: SlateRanker,
    config: SimConfig,
    rng: SplitMix64,
    slate_index: int = 0,
    logging_propensities: PropensityMatrix | None = None,
) -> SessionLog:
    """Rank the user's pool, then roll position-based examination and clicks.

    Two uniforms are consumed per position (examination, click) whatever
    the outcomes, keeping behavior draws aligned across policies. Reward
    is the content type's engagement weight on click, else 0.
    """
    slate = policy.rank(user.pool, rng=rng)
    impressions = []
    for entry in slate.entries:
        j = entry.position
        t = entry.candidate.content_type
        u_exam = rng.uniform()
        u_click = rng.uniform()
        examined = u_exam < config.examination_decay ** (j - 1)
        clicked = examined and u_click < user.click_prob[entry.candidate.id]
        m = user.within_type_rank[entry.candidate.id]
        logging_propensity = None
        if logging_propensities is not None:
            logging_propensity = logging_propensities.propensity(t, m, j)
        impressions.append(
            SessionImpression(
                position=j,
                candidate_id=entry.candidate.id,
                content_type=t,
                within_type_rank=m,
                examined=examined,
                clicked=clicked,
                reward=config.engagement_weight[t] if clicked else 0.0,
                logging_propensity=logging_propensity,
            )
        )
    return SessionLog(
        user_index=user.index,
        slate_index=slate_index,
        slate=slate,
        impressions=tuple(impressions),
    )


def _logging_matrix(policy: SlateRanker, config: SimConfig) -> PropensityMatrix | None:
    """Closed-form placement propensities, only where they are exact."""
    if not isinstance(policy, MultinomialBlender) or policy.variant != VARIANT_STRICT:
        return None
    matrix = closed_form_propensities(
        (config.pool_size_per_type,) * config.num_types, policy.as_blend_config(), config.k
    )
    return matrix if matrix.exact else None


@dataclass
class _Tally:
    """Integer accumulators; float metrics derive from these at the end so
    results cannot depend on worker partitioning."""

    impressions: list[int] = field(default_factory=list)
    clicks: list[int] = field(default_factory=list)
    slow_click_users: set[int] = field(default_factory=set)

    @classmethod
    def zeros(cls, num_types: int) -> "_Tally":
        return cls(impressions=[0] * num_types, clicks=[0] * num_types, slow_click_users=set())

    def add_session(self, log: SessionLog, slow_type: int) -> None:
        for imp in log.impressions:
            self.impressions[imp.content_type] += 1
            if imp.clicked:
                self.clicks[imp.content_type] += 1
                if imp.content_type == slow_type:
                    self.slow_click_users.add(log.user_index)

    def merge(self, other: "_Tally") -> None:
        for t in range(len(self.impressions)):
            self.impressions[t] += other.impressions[t]
            self.clicks[t] += other.clicks[t]
        self.slow_click_users |= other.slow_click_users


def _tally_to_report(name: str, tally: _Tally, config: SimConfig) -> MetricsReport:
    total_impressions = sum(tally.impressions)
    total_clicks = sum(tally.clicks)
    exposure = tuple(
        n / total_impressions if total_impressions else 0.0 for n in tally.impressions
    )
    ctr = tuple(
        tally.clicks[t] / tally.impressions[t] if tally.impressions[t] else 0.0
        for t in range(config.num_types)
    )
    total_engagement = sum(
        tally.clicks[t] * config.engagement_weight[t] for t in range(config.num_types)
    )
    return MetricsReport(
        policy=name,
        users=config.users,
        impressions=total_impressions,
        clicks=total_clicks,
        exposure=exposure,
        ctr_per_type=ctr,
        total_engagement=total_engagement,
        slow_engagement=tally.clicks[config.slow_type]
        * config.engagement_weight[config.slow_type],
        new_slow_engagers=len(tally.slow_click_users),
    )


def _run_policy_users(
    policy: SlateRanker,
    config: SimConfig,
    universe: ItemUniverse,
    user_range: range,
    logging_propensities: PropensityMatrix | None,
) -> _Tally:
    tally = _Tally.zeros(config.num_types)
    for u in user_range:
        user = draw_user(config, universe, u)
        for s in range(config.slates_per_user):
            log = simulate_session(
                user,
                policy,
                config,
                session_rng(config, u, s),
                slate_index=s,
                logging_propensities=logging_propensities,
            )
            tally.add_session(log, config.slow_type)
    return tally


def run_experiment(
    policies: Sequence[tuple[str, SlateRanker]],
    config: SimConfig,
    workers: int = 1,
) -> dict[str, MetricsReport]:
    """Run every policy over the same universe and user population.

    Returns one MetricsReport per policy, keyed by the given names, in the
    given order. ``workers`` splits users into deterministic contiguous
    partitions; results are identical for any worker count.
    """
    if not policies:
        raise InvalidConfigError("at least one policy is required")
    names = [name for name, _ in policies]
    if len(set(names)) != len(names):
        raise InvalidConfigError(f"duplicate policy names in {names}")
    if workers < 1:
        raise InvalidConfigError(f"workers must be >= 1, got {workers}")
    universe = generate_universe(config)
    reports: dict[str, MetricsReport] = {}
    for name, policy in policies:
        policy.fit()
        lp = _logging_matrix(policy, config)
        if workers == 1:
            tally = _run_policy_users(policy, config, universe, range(config.users), lp)
        else:
            bounds = [round(i * config.users / workers) for i in range(workers + 1)]
            ranges = [range(a, b) for a, b in zip(bounds, bounds[1:]) if a < b]
            with ThreadPoolExecutor(max_workers=workers) as pool_exec:
                parts = list(
                    pool_exec.map(
                        lambda r: _run_policy_users(policy, config, universe, r, lp), ranges
                    )
                )
            tally = _Tally.zeros(config.num_types)
            for part in parts:
                tally.merge(part)
        reports[name] = _tally_to_report(name, tally, config)
    return reports


def collect_impression_logs(
    policy: SlateRanker, config: SimConfig, policy_name: str = "policy"
) -> list[ImpressionLog]:
    """Run one policy and gather OPE-ready impression rows.

    Only strict blending policies carry exact closed-form logging
    propensities; anything else yields no rows.
    """
    universe = generate_universe(config)
    lp = _logging_matrix(policy, config)
    if lp is None:
        return []
    pool_sizes = (config.pool_size_per_type,) * config.num_types
    rows: list[ImpressionLog] = []
    for u in range(config.users):
        user = draw_user(config, universe, u)
        for s in range(config.slates_per_user):
            log = simulate_session(
                user,
                policy,
                config,
                session_rng(config, u, s),
                slate_index=s,
                logging_propensities=lp,
            )
            for imp in log.impressions:
                rows.append(
                    ImpressionLog(
                        pool_sizes=pool_sizes,
                        content_type=imp.content_type,
                        within_type_rank=imp.within_type_rank,
                        position=imp.position,
                        reward=imp.reward,
                        logging_propensity=imp.logging_propensity,
                    )
                )
    return rows


def on_policy_value(policy: SlateRanker, config: SimConfig) -> float:
    """Mean reward per impression from a direct on-policy run."""
    universe = generate_universe(config)
    total = 0.0
    n = 0
    for u in range(config.users):
        user = draw_user(config, universe, u)
        for s in range(config.slates_per_user):
            log = simulate_session(user, policy, config, session_rng(config, u, s), slate_index=s)
            for imp in log.impressions:
                total += imp.reward
                n += 1
    return total / n if n else 0.0


def sweep_lambda(lambdas: Sequence[float], config: SimConfig) -> list[SweepPoint]:
    """One experiment per lam; rows support picking lam for a target exposure.

    Slow-type exposure is not monotone in lam in general (it depends on
    the score scale), so the table is reported as-is.
    """
    points = []
    for lam in lambdas:
        report = run_experiment([("mmr", MmrReranker(lam=float(lam), k=config.k))], config)["mmr"]
        points.append(
            SweepPoint(
                lam=float(lam),
                slow_exposure=report.exposure[config.slow_type],
                overall_engagement=report.total_engagement,
            )
        )
    return points


def format_report_table(reports: dict[str, MetricsReport], config: SimConfig) -> str:
    """Aligned text table: policies as rows, lifts vs the first policy."""
    names = list(reports)
    base = reports[names[0]]

    def lift(value: float, ref: float) -> str:
        if ref == 0:
            return "n/a"
        return f"{100.0 * (value - ref) / ref:+.2f}%"

    header = [
        "policy",
        "slow_exposure",
        "slow_engagement",
        "lift",
        "overall_engagement",
        "lift",
        "new_slow_engagers",
    ]
    rows = [header]
    for name in names:
        rep = reports[name]
        is_base = name == names[0]
        rows.append(
            [
                name,
                f"{rep.exposure[config.slow_type]:.4f}",
                f"{rep.slow_engagement:.1f}",
                "-" if is_base else lift(rep.slow_engagement, base.slow_engagement),
                f"{rep.total_engagement:.1f}",
                "-" if is_base else lift(rep.total_engagement, base.total_engagement),
                str(rep.new_slow_engagers),
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for r, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
