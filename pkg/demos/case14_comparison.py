"""Four-design comparison on the bundled 14-node day-ahead case.

Runs the full pipeline (stochastic commitment, requirement derivation,
clearing, rolling real-time evaluation, settlement) on the packaged
14-node instance and prints the consumer-payment / curtailment
comparison.  Defaults to a reduced scenario budget so it finishes in a
couple of minutes; pass --full for the R=100, R'=50 study (about ten
minutes on one core).
"""

import argparse
from importlib import resources

import numpy as np

from rampmarket.pipeline import RunConfig, emit_report, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full", action="store_true",
                    help="use R=100 in-sample / R'=50 held-out scenarios")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out_case14")
    args = ap.parse_args()

    path = str(resources.files("rampmarket.data") / "case14.json")
    r, rp = (100, 50) if args.full else (30, 10)
    config = RunConfig(instance_path=path, seed=args.seed, scenarios=r,
                       eval_scenarios=rp, out_dir=args.out)
    print(f"Running 14-node comparison with R={r} in-sample and "
          f"R'={rp} held-out scenarios (seed {args.seed})...\n")
    report = run_experiment(config)

    up, _ = report.requirements["suc_based"]
    print("Scenario-based hourly up-requirement (MW):")
    print(" ", np.round(up, 1), "\n")
    emit_report(report, fmt="table")
    print("\nReading the table: the scenario-based design with the")
    print("first-pass commitment carried into the clearing rides the")
    print("morning load step that the other designs meet only on paper;")
    print("they re-buy that flexibility in real time at scarcity prices.")
    files = emit_report(report, fmt="csv", out_dir=args.out)
    print("\nWrote:", *files, sep="\n  ")


if __name__ == "__main__":
    main()
