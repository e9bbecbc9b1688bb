"""Command-line entry point: ``polarkit construct | bounds | simulate | sweep``.

Exit codes: 0 success, 2 usage error, 3 numeric guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bounds import (
    BecErasureEvents,
    BoundReport,
    DensityErrorEvents,
    decomposed_union_bound,
    pairwise_lower_bound,
    tree_upper_bound,
    union_bound,
)
from .channels import ChannelKind, ChannelModel, parse_channel
from .codec import default_workers, simulate_block
from .construction import CodeSpec, MetricKind, construct, minimal_elements, reliability
from .density import NumericGuardError

log = logging.getLogger("polarkit")

EXIT_USAGE = 2
EXIT_NUMERIC = 3

BOUND_NAMES = ("union", "decomposed", "tree_upper", "pair_lower")
SWEEP_HEADER = ["param", "union", "decomposed", "tree_upper", "pair_lower", "sim", "ci95", "minimal_count"]


class UsageError(Exception):
    pass


def _channel(text: str) -> ChannelModel:
    try:
        return parse_channel(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` with both ends included."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range {text!r} must be start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"range {text!r} has a non-numeric field") from None
    if not all(math.isfinite(v) for v in (start, stop, step)) or step <= 0 or stop < start:
        raise ValueError(f"range {text!r} is malformed")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # round to the step's decimal precision so 0.30 + 3 * 0.01 prints as 0.33
    digits = max(0, -math.floor(math.log10(step)) + 6)
    return [round(start + k * step, digits) for k in range(count)]


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_construct(args) -> int:
    if not 0.0 < args.rate <= 1.0:
        raise UsageError(f"rate must lie in (0, 1], got {args.rate}")
    code, r = construct(args.channel, args.n, args.rate, args.metric)
    _write(code.to_json() + "\n", args.out)
    ub = union_bound(r, code.info_set)
    print(f"K={len(code.info_set)} union_bound={ub.value:.6g}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def compute_bounds(code: CodeSpec, channel: ChannelModel, names, unsafe: bool = False) -> list[BoundReport]:
    names = list(names)
    unknown = [b for b in names if b not in BOUND_NAMES]
    if unknown:
        raise UsageError(f"unknown bound(s): {', '.join(unknown)}")
    if "tree_upper" in names and not channel.is_bec and not unsafe:
        raise UsageError("tree_upper is only valid on the BEC; pass --unsafe to force it")
    info = code.info_set
    kind = MetricKind.ERASURE_PROB if channel.is_bec else MetricKind.ERROR_PROB
    reports = []
    r = None
    if {"union", "decomposed"} & set(names):
        r = reliability(channel, code.n, kind)
    es = None
    if {"tree_upper", "pair_lower"} & set(names):
        es = BecErasureEvents(channel.param, code.n) if channel.is_bec else DensityErrorEvents(channel, code.n)
    for name in names:
        if name == "union":
            reports.append(union_bound(r, info))
        elif name == "decomposed":
            reports.append(decomposed_union_bound(r, info, channel))
        elif name == "tree_upper":
            reports.append(tree_upper_bound(es, info, unsafe=unsafe))
        elif name == "pair_lower":
            reports.append(pairwise_lower_bound(es, info))
    return reports


def cmd_bounds(args) -> int:
    code = CodeSpec.from_json(Path(args.code).read_text())
    names = [b.strip() for b in args.bounds.split(",") if b.strip()]
    reports = compute_bounds(code, args.channel, names, args.unsafe)
    if args.channel.is_bec:
        log.info("minimal elements: %d of %d", len(minimal_elements(code.info_set)), len(code.info_set))
    _write(json.dumps([rep.to_dict() for rep in reports], indent=2) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    code = CodeSpec.from_json(Path(args.code).read_text())
    res = simulate_block(code, args.channel, args.trials, args.seed, args.failure, workers=default_workers())
    _write(json.dumps(res.to_dict()) + "\n", args.out)
    return 0


def sweep_row(
    kind: ChannelKind, param: float, n: int, rate: float, trials: int, seed: int, timings: dict | None = None
) -> list:
    """One sweep row; ``timings`` (if given) accumulates seconds under ``bounds`` and ``sim``."""
    t0 = time.perf_counter()
    channel = ChannelModel(kind, param)
    code, _ = construct(channel, n, rate, MetricKind.ERROR_PROB)
    reports = {rep.kind.value: rep for rep in compute_bounds(code, channel, BOUND_NAMES)}
    t1 = time.perf_counter()
    sim = simulate_block(code, channel, trials, seed, "erasure")
    if timings is not None:
        timings["bounds"] = timings.get("bounds", 0.0) + t1 - t0
        timings["sim"] = timings.get("sim", 0.0) + time.perf_counter() - t1
    row = [
        param,
        reports["union"].value,
        reports["decomposed"].value,
        reports["tree_upper"].value,
        reports["pair_lower"].value,
        sim.estimate,
        sim.ci95,
        reports["tree_upper"].witness["minimal_count"],
    ]
    if not all(math.isfinite(v) for v in row):
        raise NumericGuardError(f"non-finite value in sweep row at {param}")
    return row


def run_sweep(kind: ChannelKind, params, n: int, rate: float, trials: int, seed: int, workers: int = 1) -> list[list]:
    jobs = [(kind, p, n, rate, trials, seed) for p in params]
    if workers <= 1 or len(jobs) == 1:
        return [sweep_row(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: sweep_row(*job), jobs))


def write_sweep_csv(rows, fp) -> None:
    writer = csv.writer(fp)
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([f"{row[0]:g}", *(repr(float(v)) for v in row[1:7]), row[7]])


def cmd_sweep(args) -> int:
    try:
        kind = ChannelKind(args.channel.lower())
    except ValueError:
        raise UsageError(f"unknown channel family {args.channel!r}") from None
    if kind is not ChannelKind.BEC:
        raise UsageError("sweep bounds (tree_upper, block erasure) are defined for the BEC only")
    try:
        params = parse_range(args.param)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0.0 < args.rate <= 1.0:
        raise UsageError(f"rate must lie in (0, 1], got {args.rate}")
    rows = run_sweep(kind, params, args.n, args.rate, args.trials, args.seed, default_workers())
    if args.out:
        with open(args.out, "w", newline="") as fp:
            write_sweep_csv(rows, fp)
    else:
        write_sweep_csv(rows, sys.stdout)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="select an information set by density evolution")
    p.add_argument("--channel", type=_channel, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--metric", choices=["error_prob", "bhattacharyya"], default="error_prob")
    p.add_argument("--out")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("bounds", help="evaluate block error/erasure bounds for a code")
    p.add_argument("--code", required=True)
    p.add_argument("--channel", type=_channel, required=True)
    p.add_argument("--bounds", default=",".join(BOUND_NAMES))
    p.add_argument("--unsafe", action="store_true", help="allow tree_upper off the BEC")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo SC decoding")
    p.add_argument("--code", required=True)
    p.add_argument("--channel", type=_channel, required=True)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--failure", choices=["erasure", "error"], default="erasure")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="bounds and simulation over a channel parameter grid")
    p.add_argument("--channel", default="bec")
    p.add_argument("--param", required=True, help="start:stop:step, inclusive")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "n", 0) is not None and getattr(args, "n", 0) < 0:
        parser.error("--n must be nonnegative")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"polarkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"polarkit: error: cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericGuardError as exc:
        print(f"polarkit: numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
