"""Balanced-norm convergence for second-order problems (m = 1).

Runs the p = 1 studies on both S-type meshes in 1D and 2D plus the p = 2
study, prints the fitted rates and writes one CSV/JSON pair per study.
"""
import argparse
import os
import sys

from balnorm.study import StudyConfig, run_study, verdict_scale, write_outputs

STUDIES = [
    ("rd1d-const", "shishkin", 2.0, 1, [16, 32, 64, 128, 256]),
    ("rd1d-const", "bakhvalov-s", 2.0, 1, [16, 32, 64, 128, 256]),
    ("rd1d-varc", "shishkin", 3.0, 2, [16, 32, 64, 128, 256]),
    ("rd2d-tensor", "shishkin", 2.0, 1, [16, 32, 64]),
    ("rd2d-tensor", "bakhvalov-s", 2.0, 1, [16, 32, 64]),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, nargs="+", default=[1e-4, 1e-6, 1e-8])
    ap.add_argument("--outdir", default="results/study_m1")
    ap.add_argument("--skip-2d", action="store_true")
    args = ap.parse_args(argv)
    os.makedirs(args.outdir, exist_ok=True)
    ok = True
    for pid, kind, sigma, degree, ns in STUDIES:
        if args.skip_2d and pid.startswith("rd2d"):
            continue
        cfg = StudyConfig(pid, kind, sigma, degree, ns, list(args.epsilon))
        rep = run_study(cfg)
        stem = os.path.join(args.outdir, f"{pid}_{kind}_p{degree}")
        write_outputs(rep, stem + ".csv", stem + ".json")
        scale = verdict_scale(kind)
        print(f"{pid} {kind} p={degree} sigma={sigma:g}")
        for eps_key, per in rep.rates.items():
            print(f"  eps={eps_key:>8}  balanced rate vs {scale}: {per[f'total/balanced/{scale}']['exponent']:.3f}")
        for v in rep.verdicts:
            print(f"  {v['status']}  {v['name']}")
        ok &= rep.all_pass
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
