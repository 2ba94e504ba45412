"""Compare DGD, DOBOC and DOBOC-K on one desk fixture.

Writes one trace CSV per algorithm and prints iterations and communication
rounds needed to push the F-gap below a target.

    python scripts/compare_algorithms.py --fixture ring_quadratic --out runs/
"""

import argparse
from pathlib import Path

import numpy as np

from doboc import fixtures
from doboc.algorithms import AlgoConfig
from doboc.analysis import auto_eta
from doboc.simulator import NonFiniteError, run


def first_below(trace, target):
    gaps = trace.column("f_gap")
    hit = np.flatnonzero(gaps <= target)
    if not hit.size:
        return None
    row = trace.all_rows[hit[0]]
    return row.iter, row.rounds


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=sorted(fixtures.acceptance_fixtures()), default="ring_quadratic")
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--target", type=float, default=1e-10)
    ap.add_argument("--max-iter", type=int, default=2000)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    args = ap.parse_args(argv)

    prob = fixtures.acceptance_fixtures()[args.fixture]
    eta = auto_eta(prob, "auto-thm1")
    setups = {
        "dgd": AlgoConfig(eta=prob.lam, lam=prob.lam, max_iter=args.max_iter, tol=0.0),
        "doboc": AlgoConfig(eta=eta, lam=prob.lam, max_iter=min(args.max_iter, 80), tol=0.0),
        "doboc-k": AlgoConfig(eta=eta, lam=prob.lam, K=args.K, max_iter=args.max_iter, tol=0.0),
    }
    args.out.mkdir(parents=True, exist_ok=True)
    print(f"{args.fixture}: n={prob.n} p={prob.p} a={prob.a:.4g} eta={eta:.4g}")
    print(f"{'algorithm':<10}{'iterations':>12}{'rounds':>10}   (f_gap <= {args.target:g})")
    for algo, cfg in setups.items():
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                trace = run(prob, algo, cfg)
        except NonFiniteError as exc:
            # DGD's step is lambda, unstable once lambda * a >= 2
            print(f"{algo:<10}{'diverged':>12}{'':>10}   (iteration {exc.iteration})")
            continue
        trace.write_csv(args.out / f"{args.fixture}_{algo}.csv")
        hit = first_below(trace, args.target)
        it, rd = hit if hit else ("-", "-")
        print(f"{algo:<10}{it:>12}{rd:>10}")


if __name__ == "__main__":
    main()
