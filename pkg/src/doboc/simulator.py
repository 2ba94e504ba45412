"""Synchronous neighbor-only message passing.

Each round every agent broadcasts one p-vector to its neighbors; the
mailbox rejects any delivery along a non-edge and the step functions reject
incomplete inboxes. Agents of one round may be evaluated on a thread pool;
results are collected in agent order so traces are bitwise reproducible.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import algorithms as alg
from .algorithms import AgentView, AlgoConfig, ProtocolViolation
from .graph import CommGraph
from .objectives import PenaltyProblem, penalty_gradient, penalty_value

TRACE_COLUMNS = ("iter", "rounds", "messages", "f_gap", "grad_norm", "consensus_err", "err_x", "err_ybar")


class NonFiniteError(FloatingPointError):
    def __init__(self, agent: int, iteration: int):
        self.agent, self.iteration = agent, iteration
        super().__init__(f"non-finite value at agent {agent + 1} in iteration {iteration}")


def default_workers() -> int:
    raw = os.environ.get("DOBOC_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"DOBOC_THREADS must be a positive integer, got {raw!r}") from None


class Mailbox:
    """Messages of one round, keyed by receiver then sender."""

    def __init__(self, graph: CommGraph, round: int):
        self.graph = graph
        self.round = round
        self._boxes: list[dict[int, np.ndarray]] = [{} for _ in range(graph.n)]

    def post(self, sender: int, receiver: int, payload: np.ndarray) -> None:
        if sender == receiver or not self.graph.are_neighbors(sender, receiver):
            raise ProtocolViolation(receiver, sender, self.round, "message from non-neighbor")
        box = self._boxes[receiver]
        if sender in box:
            raise ProtocolViolation(receiver, sender, self.round, "duplicate message")
        box[sender] = payload

    def broadcast(self, sender: int, payload: np.ndarray) -> None:
        payload = np.array(payload, dtype=float)
        payload.setflags(write=False)
        for j in self.graph.neighbors[sender]:
            self.post(sender, j, payload)

    def inbox(self, agent: int) -> dict[int, np.ndarray]:
        return dict(self._boxes[agent])


@dataclass(frozen=True)
class Reference:
    x_star: np.ndarray
    F_star: float
    y_star: np.ndarray


def compute_reference(prob: PenaltyProblem, tol: float = 1e-12) -> Reference:
    """Penalty minimizer ``x*``, ``F(x*)`` and the unpenalized minimizer ``y*``.

    Cached on the problem instance.
    """
    key = ("reference", tol)
    if key not in prob._cache:
        x_star = alg.centralized_newton_solve(prob, tol=tol)
        y_star = alg.original_newton_solve(prob, tol=tol)
        prob._cache[key] = Reference(x_star, penalty_value(prob, x_star), y_star)
    return prob._cache[key]


@dataclass(frozen=True)
class TraceRow:
    iter: int
    rounds: int
    messages: int
    f_gap: float
    grad_norm: float
    consensus_err: float
    err_x: float
    err_ybar: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass
class RunTrace:
    """Per-iteration records of one run.

    ``rows[k]`` describes ``x_{k+1}``; ``initial`` describes ``x_0`` (zero
    rounds). ``iterates`` holds ``x_0, x_1, ...`` when requested.
    """

    algo: str
    cfg: AlgoConfig
    initial: TraceRow
    rows: list[TraceRow] = field(default_factory=list)
    converged: bool = False
    x_final: np.ndarray | None = None
    iterates: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def all_rows(self) -> list[TraceRow]:
        return [self.initial, *self.rows]

    def column(self, name: str, include_initial: bool = True) -> np.ndarray:
        rows = self.all_rows if include_initial else self.rows
        return np.array([getattr(r, name) for r in rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.all_rows:
                w.writerow(
                    [str(v) if isinstance(v, int) else format(v, ".17g") for v in r.as_tuple()]
                )


def read_trace_csv(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        return [
            {k: (int(v) if k in ("iter", "rounds", "messages") else float(v)) for k, v in row.items()}
            for row in reader
        ]


class Simulator:
    """Round-based executor for one problem and step configuration."""

    def __init__(self, prob: PenaltyProblem, cfg: AlgoConfig, workers: int | None = None):
        self.prob = prob
        self.graph = prob.graph
        self.cfg = cfg
        self.workers = default_workers() if workers is None else max(1, int(workers))
        self.rounds = 0
        self.messages = 0
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _map(self, fn: Callable[[int], np.ndarray]) -> list:
        agents = range(self.graph.n)
        if self._pool is None:
            return [fn(i) for i in agents]
        return list(self._pool.map(fn, agents))

    def exchange(self, payloads) -> Mailbox:
        """One synchronous round: every agent broadcasts its payload."""
        box = Mailbox(self.graph, self.rounds)
        for i in range(self.graph.n):
            box.broadcast(i, payloads[i])
        self.rounds += 1
        self.messages += self.graph.messages_per_round(self.prob.p)
        return box

    def view(self, i: int, x, x_box: Mailbox, g=None, g_box: Mailbox | None = None) -> AgentView:
        return AgentView(
            agent=i,
            own_x=x[i],
            weights=self.graph.row(i),
            local=self.prob.locals[i],
            neighbor_x=x_box.inbox(i),
            own_g=None if g is None else g[i],
            neighbor_g={} if g_box is None else g_box.inbox(i),
            round=(g_box or x_box).round,
        )

    def direction(self, x, inner: int, history: list | None = None) -> tuple[np.ndarray, Mailbox]:
        """Broadcast ``x``, then run ``inner`` direction exchanges.

        Returns the stacked direction ``g_inner`` and the x-round mailbox.
        If ``history`` is given, the stacked ``g_0, ..., g_inner`` are
        appended to it.
        """
        cfg = self.cfg
        x_box = self.exchange(x)
        terms = self._map(lambda i: alg.local_terms(self.view(i, x, x_box), cfg))
        g = self._map(lambda i: alg.doboc_inner_init(self.view(i, x, x_box), cfg, terms[i]))
        if history is not None:
            history.append(np.array(g))
        for _ in range(inner):
            g_box = self.exchange(g)
            prev = g
            g = self._map(
                lambda i: alg.doboc_inner_step(self.view(i, x, x_box, prev, g_box), cfg, terms[i])
            )
            if history is not None:
                history.append(np.array(g))
        return np.array(g), x_box

    def step(self, x, algo: str, k: int) -> np.ndarray:
        """Outer iteration ``k``; returns ``x_{k+1}``."""
        if algo == "dgd":
            x_box = self.exchange(x)
            new = self._map(lambda i: alg.dgd_step(self.view(i, x, x_box), self.cfg))
        else:
            g, _ = self.direction(x, alg.inner_rounds(algo, k, self.cfg.K))
            new = [alg.doboc_outer_update(x[i], g[i]) for i in range(self.graph.n)]
        for i, v in enumerate(new):
            if not np.all(np.isfinite(v)):
                raise NonFiniteError(i, k)
        return np.array(new)


def distributed_directions(prob: PenaltyProblem, x, eta: float, inner: int, workers: int | None = None) -> list[np.ndarray]:
    """Stacked directions ``[g_0, ..., g_inner]`` at a fixed ``x``, computed by message passing."""
    cfg = AlgoConfig(eta=eta, lam=prob.lam, K=inner + 1)
    out: list[np.ndarray] = []
    with Simulator(prob, cfg, workers) as sim:
        sim.direction(prob.check(x), inner, history=out)
    return out


def _row(prob: PenaltyProblem, ref: Reference, x, k: int, rounds: int, messages: int) -> TraceRow:
    xbar = x.mean(axis=0)
    return TraceRow(
        iter=k,
        rounds=rounds,
        messages=messages,
        f_gap=penalty_value(prob, x) - ref.F_star,
        grad_norm=float(np.linalg.norm(penalty_gradient(prob, x))),
        consensus_err=float(np.max(np.linalg.norm(x - xbar, axis=1))),
        err_x=float(np.linalg.norm(x - ref.x_star)),
        err_ybar=float(np.linalg.norm(xbar - ref.y_star)),
    )


def run(
    prob: PenaltyProblem,
    algo: str,
    cfg: AlgoConfig,
    x0=None,
    *,
    reference: Reference | None = None,
    workers: int | None = None,
    keep_iterates: bool = False,
) -> RunTrace:
    """Execute ``algo`` until ``||grad F(x_k)|| <= cfg.tol`` or ``cfg.max_iter`` iterations.

    Raises
    ------
    ProtocolViolation
        If a message is missing or crosses a non-edge.
    NonFiniteError
        On overflow or NaN, naming the first offending agent.
    """
    if algo not in alg.ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {alg.ALGORITHMS}")
    x = np.zeros((prob.n, prob.p)) if x0 is None else prob.check(x0).copy()
    ref = reference or compute_reference(prob)
    trace = RunTrace(algo=algo, cfg=cfg, initial=_row(prob, ref, x, 0, 0, 0))
    if keep_iterates:
        trace.iterates = [x.copy()]
    trace.converged = trace.initial.grad_norm <= cfg.tol
    with Simulator(prob, cfg, workers) as sim:
        k = 0
        while not trace.converged and k < cfg.max_iter:
            x = sim.step(x, algo, k)
            k += 1
            row = _row(prob, ref, x, k, sim.rounds, sim.messages)
            trace.rows.append(row)
            if keep_iterates:
                trace.iterates.append(x.copy())
            trace.converged = row.grad_norm <= cfg.tol
    trace.x_final = x
    return trace
