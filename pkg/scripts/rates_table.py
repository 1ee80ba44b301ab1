"""Print exact, printed-formula and Monte Carlo rates side by side.

Flags every printed closed form that disagrees with enumeration and every
Monte Carlo rate beyond 4 SE of it.

    python scripts/rates_table.py --trials 1000000 --seed 1
"""
import argparse

from aoaq.analytics import (RateQuery, UnsupportedQuery, compare_reports, exact_rates, monte_carlo_rates,
                            paper_report)
from aoaq.rng import derive_seed

PROTOCOLS = ["single", "alternating", "conj2", "disj2", "guarded2", "majbool3", "majbool5", "majgate3", "majgate5"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--f", type=float, nargs="+", default=[0.001, 0.01, 0.1, 0.5])
    ap.add_argument("--a", type=float, nargs="+", default=[0.3, 0.5, 0.8, 0.9])
    ap.add_argument("--trials", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    print(f"{'protocol':<12}{'f':>7}{'a':>6}  {'rate':<10}{'exact':>14}{'printed':>14}{'mc':>14}{'z':>7}")
    index = 0
    for token in PROTOCOLS:
        for f in args.f:
            for a in args.a:
                q = RateQuery.of(token, f, a)
                exact = exact_rates(q)
                try:
                    printed = paper_report(q).rates()
                except UnsupportedQuery:
                    printed = {}
                mc = monte_carlo_rates(q, args.trials, derive_seed(args.seed, index))
                index += 1
                for check in compare_reports(exact, mc).checks:
                    p = printed.get(check.rate)
                    flag = "" if check.passed else "  MC!"
                    if p is not None and abs(p - check.reference) > 1e-12 * max(abs(p), abs(check.reference)):
                        flag += "  printed form differs"
                    p_text = f"{p:14.6g}" if p is not None else f"{'-':>14}"
                    print(f"{token:<12}{f:>7g}{a:>6g}  {check.rate:<10}{check.reference:14.6g}{p_text}"
                          f"{check.estimate:14.6g}{check.z:7.2f}{flag}")


if __name__ == "__main__":
    main()
