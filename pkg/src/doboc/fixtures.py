"""Named desk-scale problems used by the tests, the verify command and scripts."""

from __future__ import annotations

import numpy as np

from .graph import build_metropolis_weights, path_edges, ring_edges, star_edges
from .objectives import (
    PenaltyProblem,
    QuadraticObjective,
    make_logistic_family,
    make_quadratic_family,
    synthetic_logistic_data,
)


def fixture_a(lam: float = 1.0) -> PenaltyProblem:
    """Two agents, ``f_1 = (y-1)^2/2``, ``f_2 = (y+1)^2/2``, ``W = [[.5,.5],[.5,.5]]``."""
    g = build_metropolis_weights(2, path_edges(2))
    locals_ = make_quadratic_family(A=[[[1.0]], [[1.0]]], b=[[-1.0], [1.0]], c=[0.5, 0.5])
    return PenaltyProblem(g, locals_, lam)


def ring_quadratic(n: int = 5, p: int = 3, seed: int = 0, spectrum=(1.0, 10.0), lam: float = 1.0) -> PenaltyProblem:
    g = build_metropolis_weights(n, ring_edges(n))
    return PenaltyProblem(g, make_quadratic_family(n, p, seed, spectrum=spectrum), lam)


def star_logistic(n: int = 4, p: int = 2, seed: int = 0, samples: int = 10, mu: float = 1.0, lam: float = 1.0) -> PenaltyProblem:
    g = build_metropolis_weights(n, star_edges(n))
    data = synthetic_logistic_data(n, p, samples, seed)
    return PenaltyProblem(g, make_logistic_family(n, p, data, mu), lam)


def single_agent_quadratic(eigenvalues=(1.0, 4.0, 10.0), seed: int = 0) -> PenaltyProblem:
    """One agent with a rotated quadratic whose Hessian spectrum is exactly ``eigenvalues``."""
    rng = np.random.default_rng(seed)
    p = len(eigenvalues)
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    A = (Q * np.asarray(eigenvalues, dtype=float)) @ Q.T
    A = 0.5 * (A + A.T)
    g = build_metropolis_weights(1, [])
    return PenaltyProblem(g, [QuadraticObjective(A, rng.standard_normal(p))], 1.0)


def acceptance_fixtures() -> dict[str, PenaltyProblem]:
    """Fixture A, the 5-agent ring quadratic and the 4-agent star logistic problem."""
    return {
        "fixture_a": fixture_a(),
        "ring_quadratic": ring_quadratic(),
        "star_logistic": star_logistic(),
    }
