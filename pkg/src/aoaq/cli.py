"""Command-line entry point: ``aoaq rates|sweep|simulate|fleet|reason``.

Exit codes: 0 success, 1 consistency violations (``reason``), 2 usage or
parse error, 3 I/O error.  ``AOAQ_SEED`` supplies the default seed; ``--seed``
overrides it.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

from . import analytics, flight_sim, forensic
from .protocols import parse_protocol
from .rng import derive_seed

COLUMNS = ("protocol", "f", "a", "d", "n", "source", "fp", "fn", "p_neutral",
           "se_fp", "se_fn", "se_neutral", "trials", "seed", "note")

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)  # shortest text that round-trips
    return str(x)


def report_row(report: analytics.RateReport, note: str = "") -> List[str]:
    q = report.query
    return [q.protocol.token, fmt(q.f), fmt(q.a), fmt(q.d), fmt(q.protocol.n), report.source,
            fmt(report.fp), fmt(report.fn), fmt(report.p_neutral),
            fmt(report.se_fp), fmt(report.se_fn), fmt(report.se_neutral),
            fmt(report.trials), fmt(report.seed), note]


def discrepancy_note(printed: analytics.RateReport, exact: Optional[analytics.RateReport]) -> str:
    """Describe where printed closed forms disagree with enumeration (relative 1e-12)."""
    if exact is None:
        return ""
    names = analytics.paper_formula_names(printed.query.protocol)
    parts = []
    for rate, value in printed.rates().items():
        ref = exact.rates()[rate]
        if value is None or ref is None:
            continue
        if not math.isclose(value, ref, rel_tol=1e-12, abs_tol=0.0):
            parts.append(f"{rate} ({names[rate]}) differs from exact-enumeration {fmt(ref)}")
    return "; ".join(parts)


@dataclass(frozen=True)
class SweepSpec:
    protocols: Sequence[str]
    f_values: Sequence[float]
    a_values: Sequence[float]
    mc_trials: Optional[int]
    seed: int
    output: str
    d: Optional[float] = None
    paper: bool = False
    neutral_policy: str = "counts-negative"

    def __post_init__(self):
        if not (self.protocols and self.f_values and self.a_values):
            raise ValueError("sweep lists must be non-empty")
        for tok in self.protocols:
            parse_protocol(tok)
        for f in self.f_values:
            for a in self.a_values:
                analytics.RateQuery.of(self.protocols[0], f, a, d=self.d)
        if self.mc_trials is not None and self.mc_trials < 1:
            raise ValueError("--mc needs a positive trial count")


def rate_rows(query: analytics.RateQuery, paper: bool, mc_trials: Optional[int], seed: int,
              workers: int = 1) -> List[List[str]]:
    rows = []
    try:
        exact = analytics.exact_rates(query)
        rows.append(report_row(exact))
    except analytics.UnsupportedQuery:
        exact = None
    if paper:
        printed = analytics.paper_report(query)
        rows.append(report_row(printed, discrepancy_note(printed, exact)))
    if mc_trials:
        mc = analytics.monte_carlo_rates(query, mc_trials, seed, workers=workers)
        note = ""
        if exact is not None:
            failed = [c.rate for c in analytics.compare_reports(exact, mc).checks if not c.passed]
            note = f"beyond 4 SE of exact-enumeration: {', '.join(failed)}" if failed else ""
        rows.append(report_row(mc, note))
    return rows


def write_csv(rows: List[List[str]], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def default_seed() -> int:
    env = os.environ.get("AOAQ_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"AOAQ_SEED must be an integer, got {env!r}") from None


def cmd_rates(args, out) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    query = analytics.RateQuery(parse_protocol(args.protocol), args.f, args.a,
                                neutral_policy=args.neutral_policy, d=args.d)
    write_csv(rate_rows(query, args.paper, args.mc, seed, args.workers), out)
    return EXIT_OK


def run_sweep(spec: SweepSpec, workers: int = 1) -> List[List[str]]:
    rows = []
    index = 0
    for tok in spec.protocols:
        for f in spec.f_values:
            for a in spec.a_values:
                query = analytics.RateQuery(parse_protocol(tok), f, a, neutral_policy=spec.neutral_policy, d=spec.d)
                rows.extend(rate_rows(query, spec.paper, spec.mc_trials, derive_seed(spec.seed, index), workers))
                index += 1
    return rows


def cmd_sweep(args, out) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    spec = SweepSpec([t for t in args.protocols.split(",") if t.strip()], _floats(args.f), _floats(args.a),
                     args.mc, seed, args.out, args.d, args.paper, args.neutral_policy)
    rows = run_sweep(spec, args.workers)
    buf = io.StringIO()
    write_csv(rows, buf)
    if spec.output == "-":
        out.write(buf.getvalue())
    else:
        try:
            with open(spec.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            print(f"aoaq: cannot write {spec.output}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    env_seed = default_seed()
    try:
        config = flight_sim.load_scenario(args.scenario, default_seed=env_seed)
    except flight_sim.ScenarioError as exc:
        print(f"aoaq: scenario error at key '{exc.key}': {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    policy = flight_sim.policy_by_name(config.policy)
    if args.fleet:
        result = flight_sim.run_fleet(config, policy, args.fleet, config.seed, workers=args.workers).to_dict()
    else:
        result = {"protocol": config.protocol.token, "policy": policy.name, "seed": config.seed,
                  **flight_sim.run_flight(config, policy).to_dict()}
    out.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_reason(args, out) -> int:
    try:
        case = forensic.load_case(args.case)
    except forensic.CaseError as exc:
        print(f"aoaq: case file error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = forensic.reason(case)
    if args.json:
        doc = {
            "violations": [{"antecedent": v.antecedent, "consequent": v.consequent, "reason": v.reason}
                           for v in report.violations],
            "consistent": report.consistent,
            "posterior_odds": None if report.odds is None else report.odds.posterior_odds,
            "decision": report.decision,
        }
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        out.write(f"{len(report.violations)} violations\n")
        for v in report.violations:
            out.write(f"  {v}\n")
        if report.odds is not None:
            out.write(f"posterior odds: {fmt(report.odds.posterior_odds)}\n")
            out.write(f"threshold: {fmt(report.odds.threshold)}\n")
            out.write(f"decision: {str(report.decision).lower()}\n")
    return EXIT_OK if report.consistent else EXIT_VIOLATIONS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aoaq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def rate_options(p):
        p.add_argument("--d", type=float, default=None, help="disagreement threshold (guarded2d)")
        p.add_argument("--paper", action="store_true", help="add a row with the printed closed forms")
        p.add_argument("--mc", type=int, default=None, metavar="TRIALS", help="add a Monte Carlo row")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--neutral-policy", choices=analytics.NEUTRAL_POLICIES, default="counts-negative")
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("rates", help="rates for one protocol and (f, a)")
    p.add_argument("--protocol", required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    rate_options(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("sweep", help="cross-product grid of rates written as CSV")
    p.add_argument("--protocols", required=True, help="comma-separated protocol tokens")
    p.add_argument("--f", required=True, help="comma-separated defect probabilities")
    p.add_argument("--a", required=True, help="comma-separated trigger thresholds")
    p.add_argument("--out", required=True, help="output CSV path, '-' for stdout")
    rate_options(p)
    p.set_defaults(func=cmd_sweep)

    for name, default_fleet in (("simulate", None), ("fleet", 1000)):
        p = sub.add_parser(name, help="simulate one flight or a fleet from a scenario file")
        p.add_argument("scenario")
        p.add_argument("--fleet", type=int, default=default_fleet, metavar="N")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reason", help="check a forensic case file")
    p.add_argument("case")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reason)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "workers", 1) < 1:
        print("aoaq: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "fleet", None) is not None and args.fleet < 1:
        print("aoaq: --fleet must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"aoaq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"aoaq: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"aoaq: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
