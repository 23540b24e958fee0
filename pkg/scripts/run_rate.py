"""Sup-grid error of the inter-subject covariance for growing n.

    python scripts/run_rate.py --n 400 1600 --reps 20
"""

import argparse

from isggm.stepdown import rate_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--n", type=int, nargs="+", default=[400, 1600])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--nuisance-scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    err = rate_study(args.d, tuple(args.n), args.reps, args.seed, nuisance_scale=args.nuisance_scale)
    print("n,error")
    for n, e in err.items():
        print(f"{n},{e:.6g}")
    ns = sorted(err)
    for a, b in zip(ns, ns[1:]):
        print(f"# ratio err({a})/err({b}) = {err[a] / err[b]:.3f}, theory (n2/n1)^(2/5) = {(b / a) ** 0.4:.3f}")


if __name__ == "__main__":
    main()
