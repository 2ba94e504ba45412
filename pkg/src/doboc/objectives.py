"""Local objectives and the penalized consensus problem.

A stacked vector ``x = (x^1, ..., x^n)`` is an ndarray of shape ``(n, p)``;
row ``i`` is agent ``i``'s block. Flattening row-major gives the ``np``
ordering used by ``W (x) I_p``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CommGraph, mix


def as_stacked(x, n: int, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n, p):
        raise ValueError(f"stacked vector must have shape ({n}, {p}), got {x.shape}")
    return x


class LocalObjective:
    """Smooth strongly convex ``f_i : R^p -> R``.

    Subclasses set ``dim``, ``m`` (strong convexity), ``M`` (smoothness)
    and ``L`` (Hessian Lipschitz constant) and implement the four
    evaluation methods.
    """

    dim: int
    m: float
    M: float
    L: float

    def value(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_vec(self, y: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.hess(y) @ v


class QuadraticObjective(LocalObjective):
    """``f(y) = 1/2 y^T A y + b^T y + c`` with ``A`` symmetric positive definite."""

    def __init__(self, A, b, c: float = 0.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape != (b.size, b.size):
            raise ValueError(f"A has shape {A.shape} but b has length {b.size}")
        if not np.array_equal(A, A.T):
            raise ValueError("A must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] <= 0:
            raise ValueError(f"A is not positive definite: smallest eigenvalue {eig[0]:.6g}")
        self.A, self.b, self.c = A, b, float(c)
        self.dim = b.size
        self.m, self.M, self.L = float(eig[0]), float(eig[-1]), 0.0

    def value(self, y):
        return float(0.5 * y @ self.A @ y + self.b @ y + self.c)

    def grad(self, y):
        return self.A @ y + self.b

    def hess(self, y):
        return self.A

    def hess_vec(self, y, v):
        return self.A @ v

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, -self.b)


def _sigmoid(t):
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class LogisticObjective(LocalObjective):
    """L2-regularized logistic loss over one agent's samples.

    ``f(y) = sum_s log(1 + exp(-l_s a_s^T y)) + mu/2 ||y||^2``.

    The smoothness bound uses ``sigma' <= 1/4`` and the Hessian Lipschitz
    bound uses ``|sigma''| <= 1 / (6 sqrt 3)``.
    """

    def __init__(self, features, labels, mu: float, dim: int | None = None):
        if mu <= 0:
            raise ValueError(f"regularizer mu must be positive, got {mu}")
        labels = np.asarray(labels, dtype=float).ravel()
        if dim is None:
            features = np.asarray(features, dtype=float)
            dim = features.shape[1]
        features = np.asarray(features, dtype=float).reshape(labels.size, dim)
        bad = labels[(labels != 1.0) & (labels != -1.0)]
        if bad.size:
            raise ValueError(f"labels must be +1 or -1, got {bad[0]!r}")
        self.features, self.labels, self.mu = features, labels, float(mu)
        self.dim = dim
        gram = features.T @ features
        top = float(np.linalg.eigvalsh(gram)[-1]) if labels.size else 0.0
        self.m = self.mu
        self.M = self.mu + 0.25 * top
        norms = np.linalg.norm(features, axis=1)
        self.L = float(np.sum(norms**3) / (6.0 * math.sqrt(3.0)))

    def _margins(self, y):
        return self.labels * (self.features @ y)

    def value(self, y):
        loss = np.sum(np.logaddexp(0.0, -self._margins(y)))
        return float(loss + 0.5 * self.mu * (y @ y))

    def grad(self, y):
        s = _sigmoid(-self._margins(y))
        return -(self.features.T @ (self.labels * s)) + self.mu * y

    def hess(self, y):
        s = _sigmoid(self._margins(y))
        d = s * (1.0 - s)
        return (self.features.T * d) @ self.features + self.mu * np.eye(self.dim)

    def hess_vec(self, y, v):
        s = _sigmoid(self._margins(y))
        d = s * (1.0 - s)
        return self.features.T @ (d * (self.features @ v)) + self.mu * v


# -- problem families -------------------------------------------------------

def random_spd(rng: np.random.Generator, p: int, spectrum: tuple[float, float]) -> np.ndarray:
    """Random SPD matrix with eigenvalues drawn uniformly from ``spectrum``."""
    lo, hi = spectrum
    if not 0 < lo <= hi:
        raise ValueError(f"spectrum must satisfy 0 < m <= M, got {spectrum}")
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    eig = rng.uniform(lo, hi, size=p)
    A = (Q * eig) @ Q.T
    return 0.5 * (A + A.T)


def make_quadratic_family(
    n: int | None = None,
    p: int | None = None,
    seed: int | None = None,
    *,
    spectrum: tuple[float, float] = (1.0, 10.0),
    A=None,
    b=None,
    c=None,
) -> list[QuadraticObjective]:
    """Quadratic local objectives, either explicit or seeded.

    Pass ``A`` and ``b`` (one entry per agent) for explicit problems, or
    ``n``, ``p`` and ``seed`` to draw Hessians with eigenvalues in
    ``spectrum`` and standard normal linear terms.
    """
    if A is not None:
        if b is None or len(A) != len(b):
            raise ValueError("explicit quadratic family needs one b per A")
        c = [0.0] * len(A) if c is None else c
        out = []
        for i, (Ai, bi, ci) in enumerate(zip(A, b, c)):
            try:
                out.append(QuadraticObjective(Ai, bi, ci))
            except ValueError as exc:
                raise ValueError(f"agent {i}: {exc}") from None
        return out
    if n is None or p is None:
        raise ValueError("seeded quadratic family needs n and p")
    rng = np.random.default_rng(seed)
    return [QuadraticObjective(random_spd(rng, p, spectrum), rng.standard_normal(p)) for _ in range(n)]


def make_logistic_family(n: int, p: int, data, mu: float) -> list[LogisticObjective]:
    """One :class:`LogisticObjective` per agent.

    ``data`` is a sequence of ``(features, labels)`` pairs, one per agent;
    an agent with no samples gets the pure regularizer.
    """
    if len(data) != n:
        raise ValueError(f"expected data for {n} agents, got {len(data)}")
    return [LogisticObjective(feat, lab, mu, dim=p) for feat, lab in data]


def synthetic_logistic_data(n: int, p: int, samples: int, seed: int | None = None):
    """Linearly separable-ish data split evenly across ``n`` agents."""
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal(p)
    out = []
    for _ in range(n):
        a = rng.standard_normal((samples, p))
        noise = 0.5 * rng.standard_normal(samples)
        labels = np.where(a @ truth + noise >= 0, 1.0, -1.0)
        out.append((a, labels))
    return out


def read_logistic_csv(path, n: int):
    """Read ``agent_id,label,feature_1..feature_p`` rows (1-based agent ids)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["agent_id", "label"] or len(header) < 3:
            raise ValueError(f"{path}: header must start with agent_id,label,feature_1")
        p = len(header) - 2
        rows: list[list[tuple[list[float], float]]] = [[] for _ in range(n)]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            agent = int(row[0])
            if not 1 <= agent <= n:
                raise ValueError(f"{path}:{lineno}: agent_id {agent} outside 1..{n}")
            rows[agent - 1].append(([float(v) for v in row[2:]], float(row[1])))
    data = []
    for samples in rows:
        feats = np.array([s[0] for s in samples], dtype=float).reshape(len(samples), p)
        labels = np.array([s[1] for s in samples], dtype=float)
        data.append((feats, labels))
    return p, data


def write_logistic_csv(path, data) -> None:
    p = data[0][0].shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "label"] + [f"feature_{k + 1}" for k in range(p)])
        for i, (feats, labels) in enumerate(data):
            for a, lab in zip(feats, labels):
                w.writerow([i + 1, int(lab)] + [repr(float(v)) for v in a])


# -- penalty problem --------------------------------------------------------

def penalty_grad_block(grad_i: np.ndarray, x_i: np.ndarray, mixed_i: np.ndarray, lam: float) -> np.ndarray:
    """Block ``i`` of grad F: ``grad f_i(x^i) + (x^i - sum_j w_ij x^j) / lambda``.

    Shared by the centralized and agent-level code paths so both produce
    the same bits.
    """
    return grad_i + (x_i - mixed_i) / lam


@dataclass(frozen=True, eq=False)
class PenaltyProblem:
    """``F(x) = sum_i f_i(x^i) + 1/(2 lambda) x^T (I - Z) x``."""

    graph: CommGraph
    locals: tuple[LocalObjective, ...]
    lam: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "locals", tuple(self.locals))
        if not self.lam > 0:
            raise ValueError(f"penalty coefficient lambda must be positive, got {self.lam}")
        if len(self.locals) != self.graph.n:
            raise ValueError(f"{len(self.locals)} local objectives for {self.graph.n} agents")
        dims = {f.dim for f in self.locals}
        if len(dims) != 1:
            raise ValueError(f"local objectives disagree on dimension: {sorted(dims)}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> int:
        return self.locals[0].dim

    @property
    def m(self) -> float:
        return min(f.m for f in self.locals)

    @property
    def M(self) -> float:
        return max(f.M for f in self.locals)

    @property
    def L(self) -> float:
        return max(f.L for f in self.locals)

    @property
    def a(self) -> float:
        """Upper bound on the spectrum of the penalty Hessian."""
        return self.M + 2.0 * (1.0 - self.graph.w_min) / self.lam

    def check(self, x) -> np.ndarray:
        return as_stacked(x, self.n, self.p)


def penalty_value(prob: PenaltyProblem, x) -> float:
    x = prob.check(x)
    h = sum(f.value(xi) for f, xi in zip(prob.locals, x))
    quad = float(np.sum(x * (x - mix(prob.graph, x))))
    return h + quad / (2.0 * prob.lam)


def penalty_gradient(prob: PenaltyProblem, x) -> np.ndarray:
    x = prob.check(x)
    mixed = mix(prob.graph, x)
    out = np.empty_like(x)
    for i, f in enumerate(prob.locals):
        out[i] = penalty_grad_block(f.grad(x[i]), x[i], mixed[i], prob.lam)
    return out


def penalty_hessian_vec(prob: PenaltyProblem, x, v) -> np.ndarray:
    x = prob.check(x)
    v = prob.check(v)
    mixed = mix(prob.graph, v)
    out = np.empty_like(v)
    for i, f in enumerate(prob.locals):
        out[i] = f.hess_vec(x[i], v[i]) + (v[i] - mixed[i]) / prob.lam
    return out


def penalty_hessian_dense(prob: PenaltyProblem, x) -> np.ndarray:
    """Materialized ``(np, np)`` Hessian of F; desk-scale oracle use only."""
    x = prob.check(x)
    n, p = prob.n, prob.p
    H = np.zeros((n * p, n * p))
    for i, f in enumerate(prob.locals):
        H[i * p:(i + 1) * p, i * p:(i + 1) * p] = f.hess(x[i])
    Z = np.kron(np.asarray(prob.graph.weights), np.eye(p))
    return H + (np.eye(n * p) - Z) / prob.lam


def original_value(prob: PenaltyProblem, y) -> float:
    """Unpenalized objective ``f(y) = sum_i f_i(y)``."""
    return sum(f.value(y) for f in prob.locals)


def original_gradient(prob: PenaltyProblem, y) -> np.ndarray:
    return sum(f.grad(y) for f in prob.locals)


def original_hessian(prob: PenaltyProblem, y) -> np.ndarray:
    return sum(f.hess(y) for f in prob.locals)
