"""Command-line front end: ``doboc run | bounds | verify``.

Exit codes: 0 success, 1 error, 2 iteration budget exhausted, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .algorithms import ProtocolViolation
from .analysis import compute_bounds
from .config import ConfigError
from .simulator import NonFiniteError, default_workers, run

EXIT_OK, EXIT_ERROR, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def cmd_run(config_path, out_path, workers: int | None = None) -> int:
    try:
        cfg = cfgmod.load(config_path)
        prob = cfgmod.build_problem(cfg)
        x0 = cfgmod.build_x0(cfg, prob)
        algo_cfg = cfgmod.build_algo_config(cfg, prob, x0)
    except (ConfigError, ValueError) as exc:
        return _err(str(exc))

    try:
        # divergence is reported through NonFiniteError, not numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            trace = run(prob, cfg.algorithm, algo_cfg, x0, workers=workers)
    except NonFiniteError as exc:
        return _err(f"numeric blow-up in iteration {exc.iteration} at agent {exc.agent + 1}")
    except ProtocolViolation as exc:
        return _err(str(exc))

    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        trace.write_csv(out_path)
    except OSError as exc:
        return _err(f"cannot write trace {out_path}: {exc}")

    last = trace.all_rows[-1]
    status = "converged" if trace.converged else "max_iter reached"
    print(
        f"{cfg.algorithm}: {status}; f_gap={last.f_gap:.6e} iterations={last.iter} "
        f"rounds={last.rounds} messages={last.messages} eta={algo_cfg.eta:.10g}"
    )
    return EXIT_OK if trace.converged else EXIT_BUDGET


def cmd_bounds(config_path) -> int:
    try:
        cfg = cfgmod.load(config_path)
        prob = cfgmod.build_problem(cfg)
        x0 = cfgmod.build_x0(cfg, prob)
        eta = cfgmod.resolve_eta(cfg, prob, x0)
    except (ConfigError, ValueError) as exc:
        return _err(str(exc))
    K = cfg.K if cfg.K is not None else (1 if cfg.algorithm == "dgd" else None)
    rep = compute_bounds(prob, eta=eta, K=K, x0=x0)
    print(rep.table())
    if rep.preconditions.get("dgd_equivalent"):
        print("note: K=1 and eta=lambda; the capped-exchange step coincides with DGD")
    payload = {k: v for k, v in rep.to_json().items() if k not in ("lam", "eta", "K", "gap0")}
    print(json.dumps(_jsonable(payload), sort_keys=True))
    return EXIT_OK


def cmd_verify(scale: str = "default", inject_bug: bool = False) -> int:
    from .verify import run_suite

    results = run_suite(scale, inject_bug=inject_bug)
    width = max(len(r.name) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name:<{width}}  {r.seconds:6.2f}s  {r.detail}")
    failed = [r for r in results if not r.passed]
    if not failed:
        print(f"all {len(results)} checks passed ({scale})")
        return EXIT_OK
    first = failed[0]
    print(json.dumps(_jsonable({"check": first.name, "counterexample": first.counterexample})))
    return EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doboc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write its trace CSV")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", required=True, type=Path)

    p_bounds = sub.add_parser("bounds", help="print the step-size bounds for a config")
    p_bounds.add_argument("--config", required=True, type=Path)

    p_verify = sub.add_parser("verify", help="run the invariant suite")
    p_verify.add_argument("--scale", choices=("tiny", "default", "full"), default="default")
    p_verify.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = default_workers()
    except ValueError as exc:
        return _err(str(exc))
    if args.command == "run":
        return cmd_run(args.config, args.out, workers)
    if args.command == "bounds":
        return cmd_bounds(args.config)
    return cmd_verify(args.scale, args.inject_bug)


if __name__ == "__main__":
    sys.exit(main())
