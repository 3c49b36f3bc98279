"""Command-line entry point: blend, propensity, simulate, evaluate.

Stdout carries data (JSON unless a text table is requested), stderr
carries diagnostics. Every subcommand is deterministic given --seed; when
a seed is needed and not given, one is drawn from OS entropy and printed
to stderr for replay.

Exit codes: 0 ok, 1 I/O or parse failure, 2 configuration/validation
failure, 3 support violation (evaluate).
"""

from __future__ import annotations

import argparse
import json
import sys

from .blend import BlendConfig
from .core import (
    Candidate,
    ParseError,
    RankingError,
    Slate,
    SlateEntry,
    build_pool,
    read_candidates_jsonl,
)
from .ope import SupportViolationError, ips_estimate, read_logs_jsonl, write_logs_jsonl
from .policies import MmrReranker, MultinomialBlender, SortRanker, policy_from_spec
from .propensity import closed_form_propensities, monte_carlo_propensities
from .rng import SplitMix64, entropy_seed
from .sim import SimConfig, collect_impression_logs, format_report_table, run_experiment

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_SUPPORT = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    chosen = entropy_seed()
    print(f"seed not given; using {chosen} (pass --seed {chosen} to replay)", file=sys.stderr)
    return chosen


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def slate_to_records(slate: Slate) -> list[dict]:
    return [
        {
            "position": e.position,
            "id": e.candidate.id,
            "content_type": e.candidate.content_type,
            "score": e.candidate.score,
            "sampled_type": e.sampled_type,
        }
        for e in slate.entries
    ]


def slate_from_records(records: list[dict]) -> Slate:
    """Rebuild a Slate from cmd_blend's JSON output (round-trip helper)."""
    entries = tuple(
        SlateEntry(
            position=int(rec["position"]),
            candidate=Candidate(
                id=rec["id"], content_type=int(rec["content_type"]), score=float(rec["score"])
            ),
            sampled_type=rec["sampled_type"],
        )
        for rec in records
    )
    return Slate(entries=entries, k=len(entries))


def cmd_blend(args: argparse.Namespace) -> int:
    candidates = read_candidates_jsonl(args.candidates)
    if args.policy == "mb":
        if args.probs is None:
            raise ParseError("--policy mb requires --probs")
        policy = MultinomialBlender(
            probs=tuple(args.probs), k=args.k, variant=args.variant, slow_type=args.slow_type
        )
        num_types = len(args.probs)
    elif args.policy == "mmr":
        if args.lam is None:
            raise ParseError("--policy mmr requires --lambda")
        policy = MmrReranker(lam=args.lam, k=args.k)
        num_types = max((c.content_type for c in candidates), default=0) + 1
    else:
        policy = SortRanker(k=args.k)
        num_types = max((c.content_type for c in candidates), default=0) + 1
    pool = build_pool(candidates, num_types)
    rng = SplitMix64(_resolve_seed(args.seed))
    slate = policy.rank(pool, rng=rng)
    _emit(json.dumps(slate_to_records(slate), indent=2), args.out)
    return EXIT_OK


def cmd_propensity(args: argparse.Namespace) -> int:
    config = BlendConfig(probs=tuple(args.probs))
    matrix = closed_form_propensities(args.pool_sizes, config, args.k)
    result = {
        "exact": matrix.exact,
        "k": args.k,
        "probs": list(config.probs),
        "pool_sizes": list(args.pool_sizes),
        "row_types": [int(t) for t in matrix.row_types],
        "row_ranks": [int(m) for m in matrix.row_ranks],
        "matrix": [[float(v) for v in row] for row in matrix.matrix],
    }
    if args.mc_samples:
        pool = build_pool(
            [
                Candidate(id=f"t{t}-{i:04d}", content_type=t, score=float(size - i))
                for t, size in enumerate(args.pool_sizes)
                for i in range(size)
            ],
            len(args.pool_sizes),
        )
        mc = monte_carlo_propensities(
            pool,
            config,
            args.k,
            args.mc_samples,
            SplitMix64(_resolve_seed(args.seed)),
            workers=args.threads,
        )
        result["mc_samples"] = args.mc_samples
        result["monte_carlo"] = [[float(v) for v in row] for row in mc.matrix]
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("content_type,within_type_rank," + ",".join(f"pos{j}" for j in range(1, args.k + 1)) + "\n")
            for t, m, row in zip(matrix.row_types, matrix.row_ranks, matrix.matrix):
                fh.write(f"{int(t)},{int(m)}," + ",".join(repr(float(v)) for v in row) + "\n")
    _emit(json.dumps(result, indent=2), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: invalid JSON: {exc.msg}") from exc
    if args.seed is not None:
        data["seed"] = args.seed
    config = SimConfig.from_dict(data)
    specs = data.get("policies")
    if not specs:
        raise ParseError(f"{args.config}: missing or empty 'policies' list")
    policies = [
        policy_from_spec(spec, k=config.k, default_slow_type=config.slow_type) for spec in specs
    ]
    reports = run_experiment(policies, config, workers=args.threads)
    if args.logs:
        by_name = dict(policies)
        if args.logs_policy is not None:
            if args.logs_policy not in by_name:
                raise ParseError(f"--logs-policy {args.logs_policy!r} not in {list(by_name)}")
            log_name = args.logs_policy
        else:
            loggable = [
                name
                for name, p in policies
                if isinstance(p, MultinomialBlender) and p.variant == "strict"
            ]
            if len(loggable) != 1:
                raise ParseError(
                    "--logs needs --logs-policy when there is not exactly one strict "
                    f"blending policy (found {loggable})"
                )
            log_name = loggable[0]
        write_logs_jsonl(collect_impression_logs(by_name[log_name], config, log_name), args.logs)
    payload = {"config": config.to_dict(), "reports": [reports[n].to_dict() for n in reports]}
    if args.table:
        table = format_report_table(reports, config)
        if args.out:
            _emit(json.dumps(payload, indent=2), args.out)
        print(table)
    else:
        _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    logs = read_logs_jsonl(args.logs)
    target = BlendConfig(probs=tuple(args.target_probs))
    result = ips_estimate(logs, target, args.k, clip=args.clip)
    _emit(
        json.dumps(
            {
                "value": result.value,
                "effective_sample_size": result.effective_sample_size,
                "n": result.n,
            },
            indent=2,
        ),
        args.out,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slateblend",
        description="Rank scored candidates of multiple content types into a single slate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_blend = sub.add_parser("blend", help="rank a candidate file into a slate")
    p_blend.add_argument("--candidates", required=True, help="candidate JSONL file")
    p_blend.add_argument("--policy", choices=["sort", "mb", "mmr"], default="sort")
    p_blend.add_argument("--k", type=int, default=10)
    p_blend.add_argument("--probs", type=_float_list, help="per-type sampling probabilities (mb)")
    p_blend.add_argument("--variant", choices=["strict", "at_least"], default="strict")
    p_blend.add_argument("--slow-type", type=int, default=None, help="slow type index (at_least)")
    p_blend.add_argument("--lambda", dest="lam", type=float, default=None, help="mmr trade-off")
    p_blend.add_argument("--seed", type=int, default=None)
    p_blend.add_argument("--out", default=None, help="output path (default stdout)")
    p_blend.set_defaults(func=cmd_blend)

    p_prop = sub.add_parser("propensity", help="placement-probability matrix for blending")
    p_prop.add_argument("--probs", type=_float_list, required=True)
    p_prop.add_argument("--k", type=int, required=True)
    p_prop.add_argument("--pool-sizes", type=_int_list, required=True)
    p_prop.add_argument("--mc-samples", type=int, default=None, help="add a Monte Carlo estimate")
    p_prop.add_argument("--seed", type=int, default=None)
    p_prop.add_argument("--threads", type=int, default=1)
    p_prop.add_argument("--csv", default=None, help="also write the closed form as CSV")
    p_prop.add_argument("--out", default=None)
    p_prop.set_defaults(func=cmd_propensity)

    p_sim = sub.add_parser("simulate", help="run the synthetic-user experiment")
    p_sim.add_argument("--config", required=True, help="SimConfig JSON with a 'policies' list")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--table", action="store_true", help="print an aligned text table")
    p_sim.add_argument("--logs", default=None, help="write impression logs (JSONL) for evaluate")
    p_sim.add_argument("--logs-policy", default=None, help="policy name to log")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="IPS off-policy estimate from logged impressions")
    p_eval.add_argument("--logs", required=True, help="impression log JSONL file")
    p_eval.add_argument("--target-probs", type=_float_list, required=True)
    p_eval.add_argument("--k", type=int, required=True)
    p_eval.add_argument("--clip", type=float, default=None, help="cap IPS weights (adds bias)")
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SupportViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SUPPORT
    except RankingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
