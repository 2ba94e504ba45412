"""Distance between penalty and consensus minimizers as lambda shrinks.

For each lambda prints the largest per-agent distance ``max_i ||x*_i - y*||``,
the consensus-mean distance ``||xbar* - y*||`` and the bound constant ``a``.

    python scripts/lambda_sweep.py --fixture star_logistic
"""

import argparse

import numpy as np

from doboc import fixtures
from doboc.simulator import compute_reference

BUILDERS = {
    "fixture_a": lambda lam: fixtures.fixture_a(lam),
    "ring_quadratic": lambda lam: fixtures.ring_quadratic(lam=lam),
    "star_logistic": lambda lam: fixtures.star_logistic(lam=lam),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=sorted(BUILDERS), default="fixture_a")
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.03, 0.01])
    args = ap.parse_args(argv)

    print(f"{'lambda':>8}{'max_i |x*_i - y*|':>20}{'|xbar* - y*|':>16}{'a':>12}")
    for lam in args.lambdas:
        prob = BUILDERS[args.fixture](lam)
        ref = compute_reference(prob)
        per_agent = float(np.max(np.linalg.norm(ref.x_star - ref.y_star, axis=1)))
        mean = float(np.linalg.norm(ref.x_star.mean(axis=0) - ref.y_star))
        print(f"{lam:>8g}{per_agent:>20.6e}{mean:>16.6e}{prob.a:>12.4g}")


if __name__ == "__main__":
    main()
