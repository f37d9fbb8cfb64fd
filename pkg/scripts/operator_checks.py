"""Rates and structural checks for the interpolation, projection and hybrid operators."""
import argparse
import json
import sys

from balnorm.study import OperatorConfig, run_operator_verification


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=1e-6)
    ap.add_argument("--json", help="write the full result here")
    args = ap.parse_args(argv)
    res = run_operator_verification(OperatorConfig(epsilon=args.epsilon))
    for c in res["checks"]:
        val = c["value"]
        val = f"{val:.3f}" if isinstance(val, float) else val
        print(f"{c['status']}  {c['name']:<28} {val!s:>8}  target {c['target']}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2, sort_keys=True)
    return 0 if res["all_pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
