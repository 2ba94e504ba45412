"""Invariant and rate checks at desk scale.

Each check returns a :class:`CheckResult`; a failing result carries the
first counterexample found (fixture, seed, point and measured error).
"""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fixtures
from .algorithms import AlgoConfig, centralized_run, inject_sign_bug
from .analysis import (
    auto_eta,
    closed_form_ghat,
    compute_bounds,
    estimate_rates,
    newton_step,
    verify_lemma4_bound,
)
from .graph import dense_mixing_operator, mix, validate_weights
from .objectives import (
    PenaltyProblem,
    penalty_gradient,
    penalty_hessian_dense,
    penalty_hessian_vec,
    penalty_value,
)
from .simulator import compute_reference, distributed_directions, run

SCALES = ("tiny", "default", "full")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    counterexample: dict | None = None
    seconds: float = 0.0


@dataclass(frozen=True)
class Scale:
    points: int
    k_max: int
    fixtures: tuple[str, ...]
    seeds: tuple[int, ...] = (0,)
    extra: dict = field(default_factory=dict)


SCALE_TABLE = {
    "tiny": Scale(points=2, k_max=4, fixtures=("fixture_a", "ring_quadratic")),
    "default": Scale(points=10, k_max=10, fixtures=("fixture_a", "ring_quadratic", "star_logistic")),
    "full": Scale(points=20, k_max=20, fixtures=("fixture_a", "ring_quadratic", "star_logistic"), seeds=(0, 1, 2)),
}


def _fixture(name: str, seed: int) -> PenaltyProblem:
    if name == "fixture_a":
        return fixtures.fixture_a()
    if name == "ring_quadratic":
        return fixtures.ring_quadratic(seed=seed)
    if name == "star_logistic":
        return fixtures.star_logistic(seed=seed)
    raise KeyError(name)


def _problems(scale: Scale):
    for name in scale.fixtures:
        for seed in scale.seeds if name != "fixture_a" else (0,):
            yield name, seed, _fixture(name, seed)


def _points(prob: PenaltyProblem, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(1000 + seed)
    return [rng.standard_normal((prob.n, prob.p)) for _ in range(count)]


# -- finite-difference oracles ---------------------------------------------

def fd_gradient(func: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        out[idx] = (func(x + e) - func(x - e)) / (2.0 * h)
    return out


def fd_directional(grad: Callable[[np.ndarray], np.ndarray], x: np.ndarray, v: np.ndarray, h: float = 1e-5) -> np.ndarray:
    return (grad(x + h * v) - grad(x - h * v)) / (2.0 * h)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# -- checks ----------------------------------------------------------------

def check_oracle_equivalence(scale: Scale, factors=(0.1, 1.0, 1.9), tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for name, seed, prob in _problems(scale):
        a = prob.a
        for pi, x in enumerate(_points(prob, scale.points, seed)):
            for fac in factors:
                eta = fac / a
                hist = distributed_directions(prob, x, eta, scale.k_max)
                for k, g in enumerate(hist):
                    err = float(np.max(np.abs(g - closed_form_ghat(prob, x, eta, k))))
                    worst = max(worst, err)
                    if not err <= tol:
                        return CheckResult(
                            "oracle_equivalence", False, f"max entry error {err:.3e} > {tol:g}",
                            {"fixture": name, "seed": seed, "point_index": pi, "point": x.tolist(),
                             "eta": eta, "k": k, "error": err},
                        )
    return CheckResult("oracle_equivalence", True, f"max entry error {worst:.3e}")


def check_superlinear_envelope(prob: PenaltyProblem | None = None, floor: float = 1e-13, max_iter: int = 60) -> CheckResult:
    prob = prob or fixtures.ring_quadratic()
    eta = 1.0 / prob.a
    bounds = compute_bounds(prob, eta=eta)
    # grad F >= m * err with m >= 1 here, so this stops once err is at the floor
    trace = run(prob, "doboc", AlgoConfig(eta=eta, lam=prob.lam, max_iter=max_iter, tol=floor))
    rep = estimate_rates(trace, c=bounds.c, floor=floor)
    ok = bool(rep.thm1_ok and rep.superlinear)
    detail = (f"c={bounds.c:.6f}, {rep.ratios.size} ratios, max envelope excess {rep.thm1_max_excess:.3e}, "
              f"strictly decreasing={rep.superlinear}")
    cex = None if ok else {"fixture": "ring_quadratic", "eta": eta, "ratios": rep.ratios.tolist()}
    return CheckResult("superlinear_envelope", ok, detail, cex)


def check_linear_envelope(prob: PenaltyProblem | None = None, Ks=(2, 5), iters: int = 100) -> CheckResult:
    prob = prob or fixtures.ring_quadratic()
    details = []
    for K in Ks:
        eta = auto_eta(prob, "auto-thm2", K)
        b = compute_bounds(prob, eta=eta, K=K)
        trace = run(prob, "doboc-k", AlgoConfig(eta=eta, lam=prob.lam, K=K, max_iter=iters, tol=0.0))
        rep = estimate_rates(trace, epsilon=b.epsilon, floor=0.0)
        ok = bool(b.epsilon > 0 and rep.thm2_ok and len(trace) == iters)
        details.append(f"K={K}: eta={eta:.3e} eps={b.epsilon:.3e} fitted rate={rep.linear_rate:.6f}")
        if not ok:
            return CheckResult("linear_envelope", False, "; ".join(details),
                               {"fixture": "ring_quadratic", "K": K, "eta": eta, "epsilon": b.epsilon})
    return CheckResult("linear_envelope", True, "; ".join(details))


def check_dgd_recovery(scale: Scale, iters: int = 50) -> CheckResult:
    for name, seed, prob in _problems(scale):
        cfg_d = AlgoConfig(eta=prob.lam, lam=prob.lam, max_iter=iters, tol=0.0)
        cfg_k = AlgoConfig(eta=prob.lam, lam=prob.lam, K=1, max_iter=iters, tol=0.0)
        td = run(prob, "dgd", cfg_d, keep_iterates=True)
        tk = run(prob, "doboc-k", cfg_k, keep_iterates=True)
        for k, (a, b) in enumerate(zip(td.iterates, tk.iterates)):
            if not np.array_equal(a, b):
                return CheckResult("dgd_recovery", False, f"{name}: iterates differ at k={k}",
                                   {"fixture": name, "seed": seed, "k": k})
        if len(td.iterates) != iters + 1:
            return CheckResult("dgd_recovery", False, f"{name}: run stopped early")
    return CheckResult("dgd_recovery", True, f"bitwise equal for {iters} iterations")


def newton_deviations(k_max: int = 200, seed: int = 7):
    """Deviations ``||g_k - Newton step||`` for k = 0..k_max on the single-agent fixture."""
    prob = fixtures.single_agent_quadratic()
    eta = 1.0 / prob.M
    x = np.random.default_rng(seed).standard_normal((1, prob.p))
    N = newton_step(prob, x)
    hist = distributed_directions(prob, x, eta, k_max)
    dev = np.array([np.linalg.norm(g - N) for g in hist])
    return dev, float(np.linalg.norm(N)), 1.0 - eta * prob.m


RATIO_SLACK = 1e-12


def check_newton_limit(k_max: int = 200, rel_target: float = 1e-8) -> CheckResult:
    """Geometric approach of the direction to the Newton step.

    The per-step ratio is compared with ``1 - eta m`` (slack 1e-12) only
    while the deviation exceeds ``eps / slack * ||N||``: rounding leaves an
    absolute floor near ``eps ||N||``, which shifts the ratio by about
    ``eps ||N|| / dev`` and swamps the slack below that level.
    """
    dev, nN, factor = newton_deviations(k_max)
    resolvable = np.finfo(float).eps / RATIO_SLACK
    ratios = dev[1:] / dev[:-1]
    live = dev[1:] >= resolvable * nN
    bad = np.flatnonzero(live & (ratios > factor + RATIO_SLACK))
    rel = float(dev[-1] / nN)
    env = factor ** np.arange(1, k_max + 2) * nN * (1 + 1e-9)
    ok = bad.size == 0 and rel <= rel_target and bool(np.all(dev <= env))
    detail = (f"max ratio {ratios[live].max():.6f} over {int(live.sum())} resolvable steps (limit {factor:.6f}), "
              f"relative deviation at k={k_max}: {rel:.3e}")
    cex = None if ok else {"fixture": "single_agent_quadratic", "first_bad_k": int(bad[0]) if bad.size else None,
                           "relative_deviation": rel}
    return CheckResult("newton_limit", ok, detail, cex)


def check_spectral_sandwich(scale: Scale, slack: float = 1e-9) -> CheckResult:
    for name, seed, prob in _problems(scale):
        lo, hi = prob.m - slack, prob.a + slack
        for pi, x in enumerate(_points(prob, scale.points, seed)):
            ev = np.linalg.eigvalsh(penalty_hessian_dense(prob, x))
            if ev[0] < lo or ev[-1] > hi:
                return CheckResult("spectral_sandwich", False,
                                   f"{name}: eigenvalues [{ev[0]:.6g}, {ev[-1]:.6g}] outside [{lo:.6g}, {hi:.6g}]",
                                   {"fixture": name, "seed": seed, "point": x.tolist()})
    return CheckResult("spectral_sandwich", True, "all eigenvalues inside [m, a]")


def check_derivatives(scale: Scale, grad_tol: float = 1e-6, hess_tol: float = 1e-5) -> CheckResult:
    worst_g = worst_h = 0.0
    for name, seed, prob in _problems(scale):
        rng = np.random.default_rng(2000 + seed)
        for pi, x in enumerate(_points(prob, scale.points, seed)):
            eg = _rel(fd_gradient(lambda z: penalty_value(prob, z), x), penalty_gradient(prob, x))
            v = rng.standard_normal(x.shape)
            eh = _rel(fd_directional(lambda z: penalty_gradient(prob, z), x, v), penalty_hessian_vec(prob, x, v))
            worst_g, worst_h = max(worst_g, eg), max(worst_h, eh)
            if eg > grad_tol or eh > hess_tol:
                return CheckResult("derivative_consistency", False,
                                   f"{name}: gradient rel err {eg:.3e}, Hessian-vector rel err {eh:.3e}",
                                   {"fixture": name, "seed": seed, "point": x.tolist()})
    return CheckResult("derivative_consistency", True,
                       f"gradient rel err <= {worst_g:.3e}, Hessian-vector rel err <= {worst_h:.3e}")


def check_communication(T: int = 10, Ks=(2, 3, 5)) -> CheckResult:
    prob = fixtures.ring_quadratic()
    per_round = prob.graph.messages_per_round(prob.p)
    eta = 1.0 / prob.a
    cases = [("doboc", None, T * (T + 1) // 2), ("dgd", None, T)] + [("doboc-k", K, K * T) for K in Ks]
    for algo, K, expect in cases:
        cfg = AlgoConfig(eta=eta if algo != "dgd" else prob.lam, lam=prob.lam, K=K or 1, max_iter=T, tol=0.0)
        trace = run(prob, algo, cfg)
        rounds = trace.column("rounds")
        msgs = trace.column("messages")
        if rounds[-1] != expect or not np.array_equal(msgs, rounds * per_round):
            return CheckResult("communication_accounting", False,
                               f"{algo} K={K}: rounds {rounds[-1]} (expected {expect}), messages {msgs[-1]}",
                               {"algo": algo, "K": K, "rounds": int(rounds[-1])})
    return CheckResult("communication_accounting", True,
                       f"DOBOC T={T}: {T * (T + 1) // 2} rounds; {per_round} scalars per round")


def check_simulator_equivalence(scale: Scale, iters: int = 20, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for name, seed, prob in _problems(scale):
        x0 = _points(prob, 1, seed)[0]
        eta = 1.0 / prob.a
        for algo, K in (("dgd", 1), ("doboc", 1), ("doboc-k", 3)):
            cfg = AlgoConfig(eta=eta if algo != "dgd" else prob.lam, lam=prob.lam, K=K, max_iter=iters, tol=0.0)
            dist = run(prob, algo, cfg, x0, keep_iterates=True).iterates
            cent = centralized_run(prob, algo, cfg, x0, iters)
            for k, (a, b) in enumerate(zip(dist, cent)):
                err = float(np.max(np.abs(a - b)))
                if algo == "dgd":
                    # same expression on both paths: bitwise
                    err = 0.0 if np.array_equal(a, b) else np.inf
                worst = max(worst, err)
                if err > tol:
                    return CheckResult("simulator_equivalence", False, f"{name} {algo}: error {err:.3e} at k={k}",
                                       {"fixture": name, "seed": seed, "algo": algo, "k": k, "error": err})
    return CheckResult("simulator_equivalence", True, f"max entry error {worst:.3e} over {iters} iterations")


def check_penalty_trend(lams=(1.0, 0.1, 0.01)) -> CheckResult:
    """Distance of the penalty minimizer's blocks to the consensus minimizer shrinks with lambda."""
    dists = []
    for lam in lams:
        prob = fixtures.fixture_a(lam)
        ref = compute_reference(prob)
        dists.append(float(np.max(np.linalg.norm(ref.x_star - ref.y_star, axis=1))))
    ok = all(b < a for a, b in zip(dists, dists[1:]))
    return CheckResult("penalty_gap_trend", ok, "max_i ||x*_i - y*|| = " + ", ".join(f"{d:.4g}" for d in dists))


def check_cubic_bound(scale: Scale) -> CheckResult:
    for name, seed, prob in _problems(scale):
        rep = verify_lemma4_bound(prob, pairs=100 if scale.points >= 10 else 20, seed=seed)
        if not rep.ok:
            return CheckResult("cubic_upper_bound", False, f"{name}: violation {rep.max_violation:.3e}",
                               {"fixture": name, "seed": seed})
    return CheckResult("cubic_upper_bound", True, "cubic upper bound holds on all sampled pairs")


def check_graphs(scale: Scale) -> CheckResult:
    for name, seed, prob in _problems(scale):
        rep = validate_weights(prob.graph)
        if not rep.ok:
            return CheckResult("graph_weights", False, f"{name}: {[c.name for c in rep.failed]}")
        x = _points(prob, 1, seed)[0]
        dense = (dense_mixing_operator(prob.graph, prob.p) @ x.ravel()).reshape(x.shape)
        err = float(np.max(np.abs(mix(prob.graph, x) - dense)))
        if err > 1e-12:
            return CheckResult("graph_weights", False, f"{name}: mix differs from dense product by {err:.3e}")
    return CheckResult("graph_weights", True, "weights valid; mixing matches dense W (x) I")


def run_suite(scale: str = "default", inject_bug: bool = False) -> list[CheckResult]:
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    sc = SCALE_TABLE[scale]
    checks: list[tuple[str, Callable[[], CheckResult]]] = [
        ("graph_weights", lambda: check_graphs(sc)),
        ("derivative_consistency", lambda: check_derivatives(sc)),
        ("spectral_sandwich", lambda: check_spectral_sandwich(sc)),
        ("oracle_equivalence", lambda: check_oracle_equivalence(sc)),
        ("simulator_equivalence", lambda: check_simulator_equivalence(sc)),
        ("dgd_recovery", lambda: check_dgd_recovery(sc)),
        ("communication_accounting", check_communication),
        ("superlinear_envelope", check_superlinear_envelope),
        ("newton_limit", check_newton_limit),
    ]
    if scale != "tiny":
        checks += [
            ("linear_envelope", check_linear_envelope),
            ("penalty_gap_trend", check_penalty_trend),
            ("cubic_upper_bound", lambda: check_cubic_bound(sc)),
        ]
    results = []
    bug = inject_sign_bug() if inject_bug else contextlib.nullcontext()
    with bug, np.errstate(all="ignore"):
        for name, fn in checks:
            t0 = time.perf_counter()
            try:
                res = fn()
            except Exception as exc:  # a crashing check is a failed check
                res = CheckResult(name, False, f"raised {type(exc).__name__}: {exc}",
                                  {"error": type(exc).__name__, "message": str(exc)})
            res.seconds = time.perf_counter() - t0
            results.append(res)
    return results
