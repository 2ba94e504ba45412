"""Communication graphs, mixing weights and neighbor-local mixing.

Agents are 0-based internally. Config files and CLI input use 1-based
indices; conversion happens in :mod:`doboc.config`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

STOCHASTIC_TOL = 1e-12


class GraphError(ValueError):
    """Raised for malformed or disconnected topologies."""


def _normalize_edges(n: int, edges: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise GraphError(f"self-loop ({i}, {j}) is not an edge")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def connected_components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class CommGraph:
    """Undirected graph with a symmetric doubly stochastic weight matrix.

    ``weights`` is the dense ``n x n`` matrix W (read-only). ``neighbors[i]``
    lists N_i in increasing order; ``closed[i]`` is N_i with i inserted in
    sorted position, which fixes the summation order of every mixing step.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    weights: np.ndarray
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    closed: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(v)) for v in nbrs))
        object.__setattr__(
            self, "closed", tuple(tuple(sorted(v + [i])) for i, v in enumerate(nbrs))
        )
        self.weights.setflags(write=False)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(v) for v in self.neighbors])

    @property
    def w_min(self) -> float:
        return float(np.min(np.diag(self.weights)))

    def row(self, i: int) -> dict[int, float]:
        """Weights ``{j: w_ij}`` over the closed neighborhood of agent ``i``."""
        return {j: float(self.weights[i, j]) for j in self.closed[i]}

    def messages_per_round(self, p: int) -> int:
        """Scalars sent in one broadcast round: sum_i |N_i| * p."""
        return int(sum(len(v) for v in self.neighbors)) * p

    def are_neighbors(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges


def build_metropolis_weights(n: int, edges: Iterable[tuple[int, int]]) -> CommGraph:
    """Metropolis-Hastings weights ``w_ij = 1 / (1 + max(deg_i, deg_j))``.

    Parameters
    ----------
    n : int
        Number of agents.
    edges : iterable of (int, int)
        0-based unordered pairs; duplicates and orientation are ignored.

    Raises
    ------
    GraphError
        If ``n < 1`` or the graph is disconnected.
    """
    if n < 1:
        raise GraphError("a graph needs at least one agent (n=0 given)")
    E = _normalize_edges(n, edges)
    comps = connected_components(n, E)
    if len(comps) > 1:
        one_based = [[i + 1 for i in c] for c in comps]
        raise GraphError(f"graph is disconnected; components (agents numbered from 1): {one_based}")
    deg = np.zeros(n, dtype=int)
    for i, j in E:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n, n))
    for i, j in sorted(E):
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - sum(W[i, j] for j in range(n) if j != i)
    return CommGraph(n=n, edges=E, weights=W)


def from_weight_matrix(W, *, validate: bool = True) -> CommGraph:
    """Build a graph whose edges are the off-diagonal support of ``W``.

    With ``validate=True`` a failing :func:`validate_weights` report raises
    :class:`GraphError` listing the failed checks.
    """
    W = np.array(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
        raise GraphError(f"weight matrix must be square and non-empty, got shape {W.shape}")
    n = W.shape[0]
    E = frozenset(
        (i, j) for i in range(n) for j in range(i + 1, n) if W[i, j] != 0 or W[j, i] != 0
    )
    g = CommGraph(n=n, edges=E, weights=W)
    if validate:
        report = validate_weights(g)
        if not report.ok:
            bad = ", ".join(f"{c.name} (max violation {c.violation:.3g})" for c in report.failed)
            raise GraphError(f"invalid weight matrix: {bad}")
    return g


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    violation: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    w_min: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_weights(g: CommGraph, tol: float = STOCHASTIC_TOL) -> ValidationReport:
    """Check every weight-matrix condition; never raises."""
    W = np.asarray(g.weights, dtype=float)
    n = g.n
    asym = float(np.max(np.abs(W - W.T))) if n else 0.0
    row_dev = float(np.max(np.abs(W.sum(axis=1) - 1.0)))
    col_dev = float(np.max(np.abs(W.sum(axis=0) - 1.0)))
    diag = np.diag(W)
    # w_ii = 0 fails the check even though its violation magnitude is 0
    diag_ok = bool(np.all(diag > 0))
    diag_viol = float(max(0.0, -np.min(diag)))

    support_viol = 0.0
    neg_viol = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            edge = g.are_neighbors(i, j)
            if edge and W[i, j] <= 0:
                support_viol = max(support_viol, abs(W[i, j]) if W[i, j] < 0 else 1.0)
            if not edge and W[i, j] != 0:
                support_viol = max(support_viol, abs(W[i, j]))
            if W[i, j] < 0:
                neg_viol = max(neg_viol, -W[i, j])
    comps = connected_components(n, g.edges)

    checks = (
        Check("symmetry", asym == 0.0, asym),
        Check("row_sums", row_dev <= tol, row_dev),
        Check("column_sums", col_dev <= tol, col_dev),
        Check("nonnegative", neg_viol == 0.0, neg_viol),
        Check("diagonal_positive", diag_ok, diag_viol),
        Check("support", support_viol == 0.0, support_viol),
        Check("connected", len(comps) == 1, float(len(comps) - 1)),
    )
    return ValidationReport(checks=checks, w_min=float(np.min(diag)))


def weighted_sum(weights: Mapping[int, float], values: Mapping[int, np.ndarray]) -> np.ndarray:
    """``sum_j weights[j] * values[j]`` accumulated in increasing ``j``.

    Every mixing computation in the package goes through here so the
    floating-point result does not depend on who performs it.
    """
    keys = sorted(weights)
    acc = weights[keys[0]] * values[keys[0]]
    for j in keys[1:]:
        acc = acc + weights[j] * values[j]
    return acc


def mix(g: CommGraph, x) -> np.ndarray:
    """Action of ``Z = W (x) I`` on a stacked vector of shape ``(n, p)``.

    Z is never formed; block i is ``sum_{j in N_i + {i}} w_ij x^j``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != g.n:
        raise ValueError(f"expected stacked vector with {g.n} blocks, got shape {x.shape}")
    out = np.empty_like(x)
    for i in range(g.n):
        row = g.row(i)
        out[i] = weighted_sum(row, {j: x[j] for j in row})
    return out


def dense_mixing_operator(g: CommGraph, p: int) -> np.ndarray:
    """Materialized ``W (x) I_p``; for oracles and tests only."""
    return np.kron(np.asarray(g.weights), np.eye(p))


# -- common topologies (0-based edge lists) --------------------------------

def path_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def ring_edges(n: int) -> list[tuple[int, int]]:
    if n < 3:
        return path_edges(n)
    return [(i, (i + 1) % n) for i in range(n)]


def star_edges(n: int) -> list[tuple[int, int]]:
    return [(0, i) for i in range(1, n)]


def complete_edges(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]
