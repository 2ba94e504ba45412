"""Deviation of the inner-loop direction from the Newton step versus k.

Prints ``||g_k - N|| / ||N||``, the per-step ratio and the bound ``1 - eta m``
on the single-agent quadratic; the ratio column shows where rounding noise
takes over.

    python scripts/newton_limit.py --k-max 200 --every 10
"""

import argparse

import numpy as np

from doboc.verify import newton_deviations


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k-max", type=int, default=200)
    ap.add_argument("--every", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    dev, nN, factor = newton_deviations(args.k_max, args.seed)
    print(f"bound 1 - eta m = {factor:.15f}")
    print(f"{'k':>5}{'rel. deviation':>18}{'ratio - bound':>16}")
    for k in range(1, args.k_max + 1):
        if k % args.every == 0 or k == args.k_max:
            print(f"{k:>5}{dev[k] / nN:>18.6e}{dev[k] / dev[k - 1] - factor:>16.3e}")
    print(f"relative deviation at k={args.k_max}: {dev[-1] / nN:.3e} (machine eps {np.finfo(float).eps:.2e})")


if __name__ == "__main__":
    main()
