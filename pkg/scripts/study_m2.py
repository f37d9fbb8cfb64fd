"""Fourth-order problems (m = 2) with C1 Hermite cubics.

The k = 1 problem is the acceptance case.  The k = 2 problem is reported
for inspection; its layer is O(1) in amplitude and the range of N tried
here is preasymptotic.
"""
import argparse
import os
import sys

from balnorm.study import StudyConfig, run_study, write_outputs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, nargs="+", default=[1e-6])
    ap.add_argument("--n-list", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--sigma", type=float, default=4.0)
    ap.add_argument("--with-k2", action="store_true", help="also run fourth1d-k2")
    ap.add_argument("--outdir", default="results/study_m2")
    args = ap.parse_args(argv)
    os.makedirs(args.outdir, exist_ok=True)
    problems = ["fourth1d-k1"] + (["fourth1d-k2"] if args.with_k2 else [])
    ok = True
    for pid in problems:
        rep = run_study(StudyConfig(pid, "shishkin", args.sigma, 3, args.n_list, list(args.epsilon),
                                    norms=["l2", "h1_semi", "h2_semi", "l_inf", "energy", "balanced"]))
        write_outputs(rep, os.path.join(args.outdir, f"{pid}.csv"), os.path.join(args.outdir, f"{pid}.json"))
        print(pid)
        for eps_key, per in rep.rates.items():
            b = per["total/balanced/N_inv_logN"]["exponent"]
            e = per["total/energy/N_inv_logN"]["exponent"]
            print(f"  eps={eps_key:>8}  balanced {b:.3f}  energy {e:.3f}  (vs ln N / N)")
        for v in rep.verdicts:
            print(f"  {v['status']}  {v['name']}")
        if pid == "fourth1d-k1":
            ok &= rep.all_pass
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
