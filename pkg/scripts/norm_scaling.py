"""Energy versus balanced error as eps shrinks at a fixed mesh size."""
import argparse
import sys

from balnorm.study import compare_energy_vs_balanced


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problem", default="rd1d-const")
    ap.add_argument("--degree", type=int, default=1)
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--epsilon", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    args = ap.parse_args(argv)
    res = compare_energy_vs_balanced(args.problem, "shishkin", args.degree, args.epsilon, N=args.N)
    print(f"{'eps':>10} {'energy':>12} {'balanced':>12}")
    for row in res["table"]:
        print(f"{row['epsilon']:10.1e} {row['energy']:12.4e} {row['balanced']:12.4e}")
    for c in res["checks"]:
        print(f"{c['status']}  {c['name']}  {c['value']:.4g} (target {c['target']:.4g})")
    return 0 if res["all_pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
