# Run the bundled scenario presets end to end and print a compact summary.
#
# Thin driver over the package CLI: four certificate reports, two pathwise
# rate fits, one long switching run.  Full-size runs take a few minutes;
# pass --paths/--horizon to scale the Monte Carlo stages down for a smoke
# check (the analyze stages always run at the recorded truncation).
#
#   python3 scripts/reproduce_examples.py --out out --paths 50 --horizon 20

import argparse
import json
import os
import sys

from switchdiff import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--paths", type=int, default=None, help="scale down path counts")
    parser.add_argument("--horizon", type=float, default=None, help="scale down horizons")
    args = parser.parse_args()

    argv = ["reproduce", "--out", args.out]
    if args.paths is not None:
        argv += ["--paths", str(args.paths)]
    if args.horizon is not None:
        argv += ["--horizon", str(args.horizon)]
    rc = cli.main(argv)

    summary_path = os.path.join(args.out, "reproduce_summary.json")
    with open(summary_path) as fh:
        summary = json.load(fh)
    print()
    print(f"{'preset':<24} {'stage':<12} exit")
    for entry in summary["stages"]:
        print(f"{entry['preset']:<24} {entry['stage']:<12} {entry['exit_code']}")

    for name in ("example51_stable", "example51_unstable",
                 "example52_stable", "example52_unstable"):
        report_path = os.path.join(args.out, name, "report.json")
        if not os.path.exists(report_path):
            continue
        with open(report_path) as fh:
            report = json.load(fh)
        basis = ",".join(report.get("overall_basis", []))
        print(f"{name:<24} verdict={report['overall_verdict']} ({basis})")
    return rc


if __name__ == "__main__":
    sys.exit(main())
