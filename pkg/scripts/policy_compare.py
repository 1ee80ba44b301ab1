"""Compare legacy MCAS, MCASu and max-min on random scenarios.

Reports mean interventions, runaways, disablements and peak trim per policy.

    python scripts/policy_compare.py --scenarios 500 --seed 0
"""
import argparse
import random
import sys
from pathlib import Path
from statistics import fmean

from aoaq.flight_sim import POLICIES, run_flight

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from scenarios import random_scenario  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    configs = [random_scenario(random.Random(args.seed + i)) for i in range(args.scenarios)]
    print(f"{'policy':<12}{'interventions':>15}{'runaway':>10}{'disabled':>10}{'max trim':>10}")
    for name, policy in POLICIES.items():
        outs = [run_flight(cfg, policy) for cfg in configs]
        print(f"{name:<12}{fmean([o.interventions for o in outs]):15.3f}"
              f"{fmean([o.runaway_flag for o in outs]):10.3f}"
              f"{fmean([o.disabled_at is not None for o in outs]):10.3f}"
              f"{fmean([o.max_trim_excursion for o in outs]):10.3f}")


if __name__ == "__main__":
    main()
