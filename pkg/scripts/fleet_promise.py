"""Fleet comparison of sensor-disable fractions across panel designs.

Runs one-step MCASu flights and sets the observed fraction of flights that
lose MCAS against the exact no-agreement probability.

    python scripts/fleet_promise.py --flights 100000 --workers 1
"""
import argparse
import math

from aoaq.analytics import RateQuery, exact_rates
from aoaq.flight_sim import POLICIES, AOAProcess, ScenarioConfig, run_fleet
from aoaq.protocols import parse_protocol
from aoaq.rng import derive_seed
from aoaq.sensor_model import FaultModel, ThresholdConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--f", type=float, nargs="+", default=[0.001, 0.01, 0.1])
    ap.add_argument("--protocols", nargs="+", default=["guarded2", "majgate3", "majgate5"])
    ap.add_argument("--a", type=float, default=0.6)
    ap.add_argument("--flights", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'f':>7}  {'protocol':<10}{'disabled':>12}{'exact':>14}{'z':>8}")
    for fi, f in enumerate(args.f):
        for pi, token in enumerate(args.protocols):
            cfg = ScenarioConfig(steps=1, protocol=parse_protocol(token), thresholds=ThresholdConfig(args.a),
                                 fault=FaultModel(f), aoa_process=AOAProcess(0.5, 0.0, 0.0, 0.5))
            stats = run_fleet(cfg, POLICIES["mcasu"], args.flights, derive_seed(args.seed, fi * 100 + pi),
                              workers=args.workers)
            p = exact_rates(RateQuery.of(token, f, args.a)).p_neutral
            se = math.sqrt(p * (1 - p) / args.flights)
            z = (stats.fraction_disabled - p) / se if se > 0 else 0.0
            print(f"{f:>7g}  {token:<10}{stats.fraction_disabled:12.6g}{p:14.6g}{z:8.2f}")


if __name__ == "__main__":
    main()
