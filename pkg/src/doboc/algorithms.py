"""Agent-level update rules and centralized references.

Every distributed step takes an :class:`AgentView` (what agent ``i`` holds
plus the messages it received this round) and returns a new p-vector.
Nothing here touches global state, so a step cannot read a non-neighbor.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import weighted_sum
from .objectives import (
    LocalObjective,
    PenaltyProblem,
    original_gradient,
    original_hessian,
    original_value,
    penalty_grad_block,
    penalty_gradient,
    penalty_hessian_dense,
    penalty_value,
)

ALGORITHMS = ("dgd", "doboc", "doboc-k")

# test-only mutation hook, see inject_sign_bug()
_SIGN_BUG = False


class ProtocolViolation(RuntimeError):
    """An agent is missing a neighbor message or received one it should not have."""

    def __init__(self, agent: int, peer: int, round: int, reason: str = "missing message"):
        self.agent, self.peer, self.round = agent, peer, round
        super().__init__(f"protocol violation at agent {agent + 1} round {round}: {reason} (peer {peer + 1})")


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlgoConfig:
    """Step parameters shared by all agents.

    ``K`` is only read by DOBOC-K. ``tol`` is the stopping threshold on the
    global gradient norm, checked by the simulator.
    """

    eta: float
    lam: float
    K: int = 1
    max_iter: int = 100
    tol: float = 1e-10

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be an integer >= 1, got {self.K}")
        if self.tol < 0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be non-negative, got {self.max_iter}")


@dataclass(frozen=True)
class AgentView:
    """Local knowledge of agent ``agent`` during one round.

    ``weights`` maps every ``j`` in N_i and ``agent`` itself to ``w_ij``.
    ``neighbor_x`` / ``neighbor_g`` hold the payloads received from N_i.
    """

    agent: int
    own_x: np.ndarray
    weights: Mapping[int, float]
    local: LocalObjective
    neighbor_x: Mapping[int, np.ndarray] = field(default_factory=dict)
    own_g: np.ndarray | None = None
    neighbor_g: Mapping[int, np.ndarray] = field(default_factory=dict)
    round: int = 0

    @property
    def neighbors(self) -> list[int]:
        return [j for j in sorted(self.weights) if j != self.agent]

    def _closed(self, own, received: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
        vals = {self.agent: own}
        for j in self.neighbors:
            if j not in received:
                raise ProtocolViolation(self.agent, j, self.round)
            vals[j] = received[j]
        extra = set(received) - set(self.weights)
        if extra:
            j = min(extra)
            raise ProtocolViolation(self.agent, j, self.round, "message from non-neighbor")
        return vals

    def mixed_x(self) -> np.ndarray:
        return weighted_sum(self.weights, self._closed(self.own_x, self.neighbor_x))

    def mixed_g(self) -> np.ndarray:
        if self.own_g is None:
            raise ValueError(f"agent {self.agent + 1} has no inner vector yet")
        return weighted_sum(self.weights, self._closed(self.own_g, self.neighbor_g))


@dataclass(frozen=True)
class LocalTerms:
    """Quantities constant across the inner loop of one outer iteration."""

    penalty_grad: np.ndarray  # block i of grad F(x_k)
    hess: np.ndarray  # grad^2 f_i(x_k^i)


def local_terms(view: AgentView, cfg: AlgoConfig) -> LocalTerms:
    f = view.local
    g = penalty_grad_block(f.grad(view.own_x), view.own_x, view.mixed_x(), cfg.lam)
    return LocalTerms(penalty_grad=g, hess=np.asarray(f.hess(view.own_x)))


def dgd_step(view: AgentView, cfg: AlgoConfig, terms: LocalTerms | None = None) -> np.ndarray:
    """Decentralized gradient descent, ``sum_j w_ij x^j - lambda grad f_i(x^i)``.

    Evaluated as ``x^i - lambda * [grad F(x)]_i``, the same expression as
    the centralized gradient step and as DOBOC-K with ``K=1, eta=lambda``.
    """
    terms = terms or local_terms(view, cfg)
    return view.own_x - cfg.lam * terms.penalty_grad


def doboc_inner_init(view: AgentView, cfg: AlgoConfig, terms: LocalTerms | None = None) -> np.ndarray:
    terms = terms or local_terms(view, cfg)
    return cfg.eta * terms.penalty_grad


def doboc_inner_step(view: AgentView, cfg: AlgoConfig, terms: LocalTerms | None = None) -> np.ndarray:
    """One neighbor exchange of the direction recursion.

    ``g_{l+1} = eta [grad F]_i + (1 - eta/lam) g_l - eta H_i g_l
    + (eta/lam) sum_j w_ij g_l^j``.
    """
    terms = terms or local_terms(view, cfg)
    eta, lam = cfg.eta, cfg.lam
    g = view.own_g
    curv = terms.hess @ g
    if _SIGN_BUG:
        curv = -curv
    return (
        eta * terms.penalty_grad
        + (1.0 - eta / lam) * g
        - eta * curv
        + (eta / lam) * view.mixed_g()
    )


def doboc_outer_update(x_i: np.ndarray, g_final: np.ndarray) -> np.ndarray:
    return x_i - g_final


@contextlib.contextmanager
def inject_sign_bug():
    """Flip the sign of the curvature term in :func:`doboc_inner_step` (mutation testing)."""
    global _SIGN_BUG
    old, _SIGN_BUG = _SIGN_BUG, True
    try:
        yield
    finally:
        _SIGN_BUG = old


def inner_rounds(algo: str, k: int, K: int) -> int:
    """Number of direction exchanges after the x-broadcast in outer iteration ``k``."""
    if algo == "dgd":
        return 0
    if algo == "doboc":
        return k
    if algo == "doboc-k":
        return K - 1
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


# -- centralized references -------------------------------------------------

def centralized_gd_step(prob: PenaltyProblem, x, lam: float) -> np.ndarray:
    x = prob.check(x)
    return x - lam * penalty_gradient(prob, x)


def centralized_direction(prob: PenaltyProblem, x, eta: float, inner: int) -> np.ndarray:
    """Stacked direction after ``inner`` dense recursion steps.

    ``g_0 = eta grad F(x)``, ``g_{l+1} = eta grad F(x) + (I - eta H) g_l``.
    """
    x = prob.check(x)
    grad = penalty_gradient(prob, x).ravel()
    H = penalty_hessian_dense(prob, x)
    g = eta * grad
    for _ in range(inner):
        g = eta * grad + g - eta * (H @ g)
    return g.reshape(x.shape)


def centralized_run(prob: PenaltyProblem, algo: str, cfg: AlgoConfig, x0, iters: int) -> list[np.ndarray]:
    """Dense stacked recursion for ``iters`` outer steps; returns ``[x_0, ..., x_iters]``."""
    x = prob.check(x0).copy()
    out = [x.copy()]
    for k in range(iters):
        if algo == "dgd":
            x = centralized_gd_step(prob, x, cfg.lam)
        else:
            x = x - centralized_direction(prob, x, cfg.eta, inner_rounds(algo, k, cfg.K))
        out.append(x.copy())
    return out


def _damped_newton(value, grad, hess, x0, tol: float, max_iter: int) -> np.ndarray:
    x = np.array(x0, dtype=float)
    gnorm = np.inf
    for _ in range(max_iter):
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return x
        d = np.linalg.solve(hess(x), g)
        f0 = value(x)
        slope = float(g @ d)
        t = 1.0
        # once the predicted decrease is below rounding in F, take full steps
        if slope > 1e-13 * (1.0 + abs(f0)):
            while t > 1e-10 and value(x - t * d) > f0 - 0.25 * t * slope:
                t *= 0.5
        x_new = x - t * d
        if np.array_equal(x_new, x):
            break
        x = x_new
    g = grad(x)
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return x
    raise ConvergenceError(f"Newton did not reach tol {tol:g}; last gradient norm {gnorm:.3e}")


def centralized_newton_solve(prob: PenaltyProblem, x0=None, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Minimizer of F by damped Newton on the dense Hessian."""
    n, p = prob.n, prob.p
    x0 = np.zeros((n, p)) if x0 is None else prob.check(x0)
    x = _damped_newton(
        lambda v: penalty_value(prob, v.reshape(n, p)),
        lambda v: penalty_gradient(prob, v.reshape(n, p)).ravel(),
        lambda v: penalty_hessian_dense(prob, v.reshape(n, p)),
        x0.ravel(),
        tol,
        max_iter,
    )
    return x.reshape(n, p)


def original_newton_solve(prob: PenaltyProblem, y0=None, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Minimizer of ``sum_i f_i(y)`` over a single shared ``y``."""
    y0 = np.zeros(prob.p) if y0 is None else np.asarray(y0, dtype=float)
    return _damped_newton(
        lambda y: original_value(prob, y),
        lambda y: original_gradient(prob, y),
        lambda y: original_hessian(prob, y),
        y0,
        tol,
        max_iter,
    )
