"""Step-size bounds, the closed-form direction oracle and rate estimates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .objectives import (
    PenaltyProblem,
    penalty_gradient,
    penalty_hessian_dense,
    penalty_value,
)
from .simulator import RunTrace, compute_reference

DENSE_LIMIT = 1000
THM2_SAFETY = 0.99


def spectral_upper_bound(M: float, w_min: float, lam: float) -> float:
    return M + 2.0 * (1.0 - w_min) / lam


def contraction_factor(prob: PenaltyProblem, eta: float, x=None) -> float:
    """``||I - eta H||_2`` with ``H`` the penalty Hessian at ``x`` (default ``x*``)."""
    if x is None:
        x = compute_reference(prob).x_star
    H = penalty_hessian_dense(prob, x)
    ev = np.linalg.eigvalsh(H)
    return float(max(abs(1.0 - eta * ev[0]), abs(1.0 - eta * ev[-1])))


def linear_rate_constant(m: float, a: float, L: float, eta: float, K: int, gap0: float) -> float:
    """Per-iteration decrease fraction of the F-gap for the capped-exchange variant.

    Returns the raw value; it is only meaningful when the step-size
    preconditions hold.
    """
    first = (2.0 * m * m * eta - m * a * a * eta * eta * K * K) / a
    cubic = a**3 * (2.0 * a) ** 1.5 * eta**3 * K**3 * L / (6.0 * m**3) * math.sqrt(max(gap0, 0.0))
    return first - cubic


def thm2_eta_max(m: float, a: float, L: float, K: int, gap0: float) -> float:
    """Supremum of step sizes admitted by the linear-rate analysis.

    Combines ``min{1, 1/a, 2m/(a^2 K^2)}`` with ``m/(a^2 K^2)`` and the
    cubic-term limit ``sqrt(6 m^5 / (a^4 (2a)^{3/2} K^3 L sqrt(gap0)))``,
    the latter infinite when ``L = 0`` or ``gap0 = 0``.
    """
    bounds = [1.0, 1.0 / a, 2.0 * m / (a * a * K * K), m / (a * a * K * K)]
    if L > 0 and gap0 > 0:
        denom = a**4 * (2.0 * a) ** 1.5 * K**3 * L * math.sqrt(gap0)
        bounds.append(math.sqrt(6.0 * m**5 / denom))
    return min(bounds)


@dataclass
class BoundReport:
    m: float
    M: float
    L: float
    w_min: float
    lam: float
    a: float
    eta: float | None
    K: int | None
    eta_thm1_max: float
    c: float | None
    eta_thm2_max: float | None
    epsilon: float | None
    gap0: float | None
    preconditions: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("m", self.m), ("M", self.M), ("L", self.L), ("w_min", self.w_min),
            ("lambda", self.lam), ("a", self.a), ("eta", self.eta), ("K", self.K),
            ("eta_thm1_max", self.eta_thm1_max), ("c", self.c),
            ("eta_thm2_max", self.eta_thm2_max), ("epsilon", self.epsilon),
        ]
        lines = [f"{k:<14}{'-' if v is None else format(v, '.10g')}" for k, v in rows]
        lines.append("preconditions:")
        lines += [f"  {k:<24}{v}" for k, v in self.preconditions.items()]
        return "\n".join(lines)


def compute_bounds(prob: PenaltyProblem, eta: float | None = None, K: int | None = None, x0=None) -> BoundReport:
    """Constants of the convergence analysis for ``prob`` and a step ``(eta, K)``.

    ``c`` needs ``eta``; the linear-rate fields need ``K`` and use ``x0``
    (zeros by default) for the initial gap.
    """
    m, M, L, w_min, lam = prob.m, prob.M, prob.L, prob.graph.w_min, prob.lam
    a = spectral_upper_bound(M, w_min, lam)
    ref = compute_reference(prob)
    x0 = np.zeros((prob.n, prob.p)) if x0 is None else prob.check(x0)
    gap0 = max(penalty_value(prob, x0) - ref.F_star, 0.0)

    c = contraction_factor(prob, eta, ref.x_star) if eta is not None else None
    eta2 = eps = None
    if K is not None:
        eta2 = thm2_eta_max(m, a, L, K, gap0)
        if eta is not None:
            eps = linear_rate_constant(m, a, L, eta, K, gap0)

    pre: dict = {}
    if eta is not None:
        pre["eta_positive"] = eta > 0
        pre["thm1_eta_lt_2_over_a"] = 0 < eta < 2.0 / a
        pre["c_lt_1"] = c is not None and c < 1.0
        if K is not None:
            pre["lemma5_step_bound"] = eta < min(1.0, 1.0 / a, 2.0 * m / (a * a * K * K))
            pre["thm2_step_bound"] = eta < eta2
            pre["epsilon_in_0_1"] = eps is not None and 0.0 < eps < 1.0
            pre["dgd_equivalent"] = K == 1 and eta == lam
    return BoundReport(
        m=m, M=M, L=L, w_min=w_min, lam=lam, a=a, eta=eta, K=K,
        eta_thm1_max=2.0 / a, c=c, eta_thm2_max=eta2, epsilon=eps, gap0=gap0,
        preconditions=pre,
    )


def auto_eta(prob: PenaltyProblem, mode: str, K: int | None = None, x0=None) -> float:
    """``1/a`` for ``"auto-thm1"``; ``0.99`` times the linear-rate bound for ``"auto-thm2"``."""
    a = prob.a
    if mode == "auto-thm1":
        return 1.0 / a
    if mode == "auto-thm2":
        if K is None:
            raise ValueError("auto-thm2 step selection needs K")
        ref = compute_reference(prob)
        x0 = np.zeros((prob.n, prob.p)) if x0 is None else prob.check(x0)
        gap0 = max(penalty_value(prob, x0) - ref.F_star, 0.0)
        return THM2_SAFETY * thm2_eta_max(prob.m, a, prob.L, K, gap0)
    raise ValueError(f"unknown step-size mode {mode!r}")


def closed_form_ghat(prob: PenaltyProblem, x, eta: float, k: int) -> np.ndarray:
    """Dense ``[I - (I - eta H)^{k+1}] H^{-1} grad F(x)`` at desk scale.

    The matrix power is formed by repeated multiplication.
    """
    n, p = prob.n, prob.p
    if n * p > DENSE_LIMIT:
        raise ValueError(f"closed-form oracle is desk-scale only (n*p={n * p} > {DENSE_LIMIT})")
    x = prob.check(x)
    H = penalty_hessian_dense(prob, x)
    grad = penalty_gradient(prob, x).ravel()
    I = np.eye(n * p)
    B = I - eta * H
    P = B.copy()
    for _ in range(k):
        P = P @ B
    newton = np.linalg.solve(H, grad)
    return ((I - P) @ newton).reshape(n, p)


def newton_step(prob: PenaltyProblem, x) -> np.ndarray:
    x = prob.check(x)
    H = penalty_hessian_dense(prob, x)
    return np.linalg.solve(H, penalty_gradient(prob, x).ravel()).reshape(x.shape)


class TraceTooShort(ValueError):
    pass


@dataclass
class RateReport:
    ratios: np.ndarray
    superlinear: bool
    linear_rate: float | None
    thm1_envelope: np.ndarray | None = None
    thm1_ok: bool | None = None
    thm1_max_excess: float | None = None
    thm2_rate: float | None = None
    thm2_ok: bool | None = None


def estimate_rates(
    trace: RunTrace,
    c: float | None = None,
    epsilon: float | None = None,
    floor: float = 1e-13,
    abs_slack: float = 1e-12,
    rel_slack: float = 1e-9,
) -> RateReport:
    """Error ratios and envelope comparisons for a finished run.

    ``ratios[k] = err_x[k+1] / err_x[k]`` over iterations whose error is
    still above ``floor``. The run is judged superlinear when these ratios
    decrease strictly. ``c`` enables the ``err_{k+1} <= c^{k+1} err_k``
    check; ``epsilon`` the ``gap_k <= (1-eps)^k gap_0`` check.
    """
    err = trace.column("err_x")
    below = np.flatnonzero(err < floor)
    u = int(below[0]) if below.size else err.size
    if u < 3:
        raise TraceTooShort(f"need at least 3 iterates with error above {floor:g}, got {u}")
    ratios = err[1:u] / err[: u - 1]
    superlinear = bool(np.all(np.diff(ratios) < 0))

    gaps = trace.column("f_gap")
    pos = gaps[gaps > 0]
    linear = float(np.exp(np.mean(np.diff(np.log(pos))))) if pos.size >= 2 else None

    rep = RateReport(ratios=ratios, superlinear=superlinear, linear_rate=linear)
    if c is not None:
        # include the step that lands below the floor
        last = min(u, err.size - 1)
        env = c ** np.arange(1, last + 1)
        excess = err[1 : last + 1] - (env * err[:last] + abs_slack)
        rep.thm1_envelope = env
        rep.thm1_ok = bool(np.all(excess <= 0))
        rep.thm1_max_excess = float(np.max(excess))
    if epsilon is not None:
        bound = (1.0 - epsilon) ** np.arange(gaps.size) * gaps[0] * (1.0 + rel_slack)
        rep.thm2_rate = 1.0 - epsilon
        rep.thm2_ok = bool(np.all(gaps <= bound))
    return rep


@dataclass
class CubicBoundReport:
    pairs: int
    max_violation: float
    ok: bool


def verify_lemma4_bound(prob: PenaltyProblem, pairs: int = 100, seed: int = 0, scale: float = 1.0, slack: float = 1e-9) -> CubicBoundReport:
    """Sample the cubic Taylor upper bound ``F(y) <= quadratic model + L/6 ||y-x||^3``."""
    rng = np.random.default_rng(seed)
    n, p = prob.n, prob.p
    worst = -np.inf
    for _ in range(pairs):
        x = scale * rng.standard_normal((n, p))
        y = x + scale * rng.standard_normal((n, p))
        d = (y - x).ravel()
        H = penalty_hessian_dense(prob, x)
        rhs = (
            penalty_value(prob, x)
            + penalty_gradient(prob, x).ravel() @ d
            + 0.5 * d @ H @ d
            + prob.L / 6.0 * np.linalg.norm(d) ** 3
        )
        worst = max(worst, penalty_value(prob, y) - rhs)
    return CubicBoundReport(pairs=pairs, max_violation=float(worst), ok=bool(worst <= slack))
