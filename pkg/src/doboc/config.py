"""Strict JSON experiment configs.

Example::

    {
      "graph": {"type": "metropolis", "n": 2, "edges": [[1, 2]]},
      "problem": {"type": "quadratic",
                  "spec": {"A": [[[1]], [[1]]], "b": [[-1], [1]]}},
      "lambda": 1.0,
      "algorithm": "doboc",
      "eta": 0.5,
      "max_iter": 100,
      "tol": 1e-10
    }

Agent indices are 1-based. Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .algorithms import ALGORITHMS, AlgoConfig
from .analysis import auto_eta
from .graph import GraphError, build_metropolis_weights, from_weight_matrix
from .objectives import PenaltyProblem, make_logistic_family, make_quadratic_family, read_logistic_csv

ETA_MODES = ("auto-thm1", "auto-thm2")


class ConfigError(ValueError):
    """Malformed or incomplete config; the message names the offending field."""


def _keys(obj: Any, where: str, required: set[str], optional: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = sorted(required - obj.keys())
    if missing:
        raise ConfigError(f"{where}: missing field {missing[0]!r}")
    unknown = sorted(obj.keys() - required - optional)
    if unknown:
        raise ConfigError(f"{where}: unknown field {unknown[0]!r}")
    return obj


def _number(v: Any, where: str, *, positive: bool = False, integer: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


@dataclass
class ExperimentConfig:
    graph: dict
    problem: dict
    lam: float
    algorithm: str
    eta: float | str | None = None
    K: int | None = None
    max_iter: int = 1000
    tol: float = 1e-10
    x0: str | list = "zeros"
    seed: int = 0
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {
            "graph": self.graph,
            "problem": self.problem,
            "lambda": self.lam,
            "algorithm": self.algorithm,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "x0": self.x0,
            "seed": self.seed,
        }
        if self.eta is not None:
            out["eta"] = self.eta
        if self.K is not None:
            out["K"] = self.K
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


TOP_REQUIRED = {"graph", "problem", "lambda", "algorithm"}
TOP_OPTIONAL = {"eta", "K", "max_iter", "tol", "x0", "seed"}


def _check_graph(spec: Any) -> dict:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("graph: missing field 'type'")
    kind = spec["type"]
    if kind == "metropolis":
        _keys(spec, "graph", {"type", "n", "edges"})
        n = _number(spec["n"], "graph.n", integer=True)
        if not isinstance(spec["edges"], list):
            raise ConfigError("graph.edges: expected a list of [i, j] pairs")
        for k, e in enumerate(spec["edges"]):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and 1 <= v <= n for v in e)):
                raise ConfigError(f"graph.edges[{k}]: expected [i, j] with 1 <= i, j <= {n}, got {e!r}")
    elif kind == "explicit":
        _keys(spec, "graph", {"type", "weights"})
    else:
        raise ConfigError(f"graph.type: expected 'metropolis' or 'explicit', got {kind!r}")
    return spec


def _check_problem(spec: Any) -> dict:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("problem: missing field 'type'")
    kind = spec["type"]
    if kind == "quadratic":
        _keys(spec, "problem", {"type", "spec"})
        inner = spec["spec"]
        if isinstance(inner, dict) and "A" in inner:
            _keys(inner, "problem.spec", {"A", "b"}, {"c"})
        else:
            _keys(inner, "problem.spec", {"p", "spectrum"}, {"seed"})
            _number(inner["p"], "problem.spec.p", positive=True, integer=True)
            sp = inner["spectrum"]
            if not (isinstance(sp, list) and len(sp) == 2):
                raise ConfigError("problem.spec.spectrum: expected [m, M]")
            lo = _number(sp[0], "problem.spec.spectrum[0]", positive=True)
            hi = _number(sp[1], "problem.spec.spectrum[1]", positive=True)
            if lo > hi:
                raise ConfigError("problem.spec.spectrum: need m <= M")
    elif kind == "logistic":
        _keys(spec, "problem", {"type", "mu", "data"})
        _number(spec["mu"], "problem.mu", positive=True)
        if not isinstance(spec["data"], str):
            raise ConfigError("problem.data: expected a CSV path")
    else:
        raise ConfigError(f"problem.type: expected 'quadratic' or 'logistic', got {kind!r}")
    return spec


def parse_config(obj: Any, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate a decoded JSON object into an :class:`ExperimentConfig`."""
    _keys(obj, "config", TOP_REQUIRED, TOP_OPTIONAL)
    algo = obj["algorithm"]
    if algo not in ALGORITHMS:
        raise ConfigError(f"algorithm: expected one of {list(ALGORITHMS)}, got {algo!r}")
    lam = _number(obj["lambda"], "lambda", positive=True)

    eta = obj.get("eta")
    if eta is None and algo != "dgd":
        raise ConfigError(f"eta: missing field 'eta' (required for {algo})")
    if isinstance(eta, str):
        if eta not in ETA_MODES:
            raise ConfigError(f"eta: expected a positive number or one of {list(ETA_MODES)}, got {eta!r}")
    elif eta is not None:
        eta = _number(eta, "eta", positive=True)

    K = obj.get("K")
    if algo == "doboc-k" and K is None:
        raise ConfigError("K: missing field 'K' (required for doboc-k)")
    if K is not None:
        K = _number(K, "K", positive=True, integer=True)
    if eta == "auto-thm2" and K is None:
        raise ConfigError("K: missing field 'K' (required for eta='auto-thm2')")

    max_iter = _number(obj.get("max_iter", 1000), "max_iter", integer=True)
    if max_iter < 0:
        raise ConfigError("max_iter: must be non-negative")
    tol = _number(obj.get("tol", 1e-10), "tol")
    if tol < 0:
        raise ConfigError("tol: must be non-negative")
    seed = _number(obj.get("seed", 0), "seed", integer=True)
    if seed < 0:
        raise ConfigError("seed: must be an unsigned integer")
    x0 = obj.get("x0", "zeros")
    if not (x0 == "zeros" or isinstance(x0, list)):
        raise ConfigError(f"x0: expected 'zeros' or a list of per-agent vectors, got {x0!r}")

    return ExperimentConfig(
        graph=_check_graph(obj["graph"]),
        problem=_check_problem(obj["problem"]),
        lam=lam,
        algorithm=algo,
        eta=eta,
        K=K,
        max_iter=max_iter,
        tol=tol,
        x0=x0,
        seed=seed,
        base_dir=Path(base_dir),
    )


def loads(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(obj, base_dir)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return loads(text, path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- building runtime objects ----------------------------------------------

def build_problem(cfg: ExperimentConfig) -> PenaltyProblem:
    gs = cfg.graph
    try:
        if gs["type"] == "metropolis":
            g = build_metropolis_weights(gs["n"], [(i - 1, j - 1) for i, j in gs["edges"]])
        else:
            g = from_weight_matrix(gs["weights"])
    except (GraphError, ValueError, TypeError) as exc:
        raise ConfigError(f"graph: {exc}") from None

    ps = cfg.problem
    try:
        if ps["type"] == "quadratic":
            inner = ps["spec"]
            if "A" in inner:
                locals_ = make_quadratic_family(A=inner["A"], b=inner["b"], c=inner.get("c"))
            else:
                locals_ = make_quadratic_family(
                    g.n, inner["p"], inner.get("seed", cfg.seed), spectrum=tuple(inner["spectrum"])
                )
        else:
            path = Path(ps["data"])
            if not path.is_absolute():
                path = cfg.base_dir / path
            p, data = read_logistic_csv(path, g.n)
            locals_ = make_logistic_family(g.n, p, data, ps["mu"])
        return PenaltyProblem(g, locals_, cfg.lam)
    except (ValueError, OSError, TypeError) as exc:
        raise ConfigError(f"problem: {exc}") from None


def build_x0(cfg: ExperimentConfig, prob: PenaltyProblem) -> np.ndarray:
    if cfg.x0 == "zeros":
        return np.zeros((prob.n, prob.p))
    try:
        return prob.check(np.array(cfg.x0, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"x0: {exc}") from None


def resolve_eta(cfg: ExperimentConfig, prob: PenaltyProblem, x0) -> float:
    """Numeric step size; DGD uses lambda when no eta is given."""
    if cfg.eta is None:
        return cfg.lam
    if isinstance(cfg.eta, str):
        return auto_eta(prob, cfg.eta, cfg.K, x0)
    return cfg.eta


def build_algo_config(cfg: ExperimentConfig, prob: PenaltyProblem, x0) -> AlgoConfig:
    return AlgoConfig(
        eta=resolve_eta(cfg, prob, x0),
        lam=cfg.lam,
        K=cfg.K or 1,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
    )
