"""Network polymatrix games.

A game pairs an interaction graph with one payoff matrix per directed
half-edge: agent ``k`` playing against neighbour ``l`` earns
``x_k^T A[k, l] x_l``. Joint strategies are flat vectors, the
concatenation of each agent's mixed strategy; ``game.offsets`` gives the
block boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from ._validation import (
    ContractError,
    ParameterError,
    as_generator,
    check_joint_strategy,
)
from .graph import AdjacencyMatrix, from_edges

__all__ = [
    "PolymatrixGame",
    "ConflictParts",
    "assign_bimatrix",
    "reward",
    "payoff",
    "delta_identical_interests",
    "spectral_norm",
    "make_shapley",
    "make_sato",
    "make_zero_sum",
    "make_conflict",
    "uniform_strategy",
    "split_strategy",
]

# 2**-44 grid: with |P| <= 5 both P and 1 - P are exact doubles
_CONFLICT_GRID = 2.0**44


class PolymatrixGame:
    """Graph plus one payoff matrix per directed half-edge.

    Parameters
    ----------
    graph : AdjacencyMatrix
    action_counts : sequence of int
        Number of actions of each agent.
    half_edge_payoffs : mapping (k, l) -> array of shape (n_k, n_l)
        Must contain both ``(k, l)`` and ``(l, k)`` for every edge and
        nothing else.
    metadata : dict, optional
        Free-form JSON-compatible description (family, parameters, seed).
    """

    def __init__(self, graph: AdjacencyMatrix, action_counts, half_edge_payoffs, metadata=None):
        if not isinstance(graph, AdjacencyMatrix):
            graph = AdjacencyMatrix(graph)
        counts = tuple(int(c) for c in action_counts)
        if len(counts) != graph.n or any(c < 1 for c in counts):
            raise ParameterError("action_counts needs one positive entry per agent")
        expected = set()
        for k, l in graph.edges():
            expected.add((k, l))
            expected.add((l, k))
        keys = {(int(k), int(l)) for k, l in half_edge_payoffs}
        if keys != expected:
            missing = sorted(expected - keys)[:3]
            extra = sorted(keys - expected)[:3]
            raise ContractError(
                f"half-edge payoffs must match graph edges (missing {missing}, unexpected {extra})"
            )
        payoffs = {}
        for (k, l), A in half_edge_payoffs.items():
            A = np.array(A, dtype=float, copy=True)
            if A.shape != (counts[k], counts[l]):
                raise ContractError(
                    f"payoff matrix for half-edge ({k}, {l}) has shape {A.shape}, "
                    f"expected {(counts[k], counts[l])}"
                )
            if not np.all(np.isfinite(A)):
                raise ContractError(f"payoff matrix for half-edge ({k}, {l}) is not finite")
            A.setflags(write=False)
            payoffs[(int(k), int(l))] = A
        self.graph = graph
        self.action_counts = counts
        self.half_edge_payoffs = payoffs
        self.metadata = dict(metadata or {})

    @property
    def n_agents(self) -> int:
        return self.graph.n

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.action_counts)]).astype(int)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def uniform_actions(self) -> int | None:
        """Common action count, or None if agents differ."""
        return self.action_counts[0] if len(set(self.action_counts)) == 1 else None

    @cached_property
    def payoff_matrix(self) -> np.ndarray:
        """Dense block matrix with block (k, l) equal to A[k, l]; rewards are ``M @ x``."""
        o = self.offsets
        M = np.zeros((self.dim, self.dim))
        for (k, l), A in self.half_edge_payoffs.items():
            M[o[k] : o[k + 1], o[l] : o[l + 1]] = A
        M.setflags(write=False)
        return M

    @cached_property
    def agent_index(self) -> np.ndarray:
        """Agent owning each coordinate of a flat joint strategy."""
        return np.repeat(np.arange(self.n_agents), self.action_counts)

    def block(self, x, k: int) -> np.ndarray:
        o = self.offsets
        return np.asarray(x)[o[k] : o[k + 1]]

    def rewards(self, x) -> np.ndarray:
        """Reward vectors of all agents, concatenated like ``x``."""
        return self.payoff_matrix @ np.asarray(x, dtype=float)

    def scaled(self, factor: float) -> "PolymatrixGame":
        return PolymatrixGame(
            self.graph,
            self.action_counts,
            {e: factor * A for e, A in self.half_edge_payoffs.items()},
            self.metadata,
        )

    # -------------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "action_counts": list(self.action_counts),
            "edges": [list(e) for e in self.graph.edges()],
            "half_edges": [
                {"from": k, "to": l, "matrix": A.tolist()}
                for (k, l), A in sorted(self.half_edge_payoffs.items())
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolymatrixGame":
        graph = from_edges(int(data["n_agents"]), data["edges"])
        payoffs = {(int(h["from"]), int(h["to"])): np.array(h["matrix"], dtype=float)
                   for h in data["half_edges"]}
        return cls(graph, data["action_counts"], payoffs, data.get("metadata"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "PolymatrixGame":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self):
        family = self.metadata.get("family", "custom")
        return f"PolymatrixGame({family}, n_agents={self.n_agents}, edges={len(self.graph.edges())})"


def uniform_strategy(game: PolymatrixGame) -> np.ndarray:
    return np.concatenate([np.full(n, 1.0 / n) for n in game.action_counts])


def split_strategy(game: PolymatrixGame, x) -> list[np.ndarray]:
    x = np.asarray(x)
    return [x[a:b] for a, b in zip(game.offsets[:-1], game.offsets[1:])]


def assign_bimatrix(graph: AdjacencyMatrix, A, B, seed=None, *, metadata=None) -> PolymatrixGame:
    """Place the same bimatrix game on every edge with random orientation.

    For each undirected edge a fair coin decides whether the lower-indexed
    endpoint receives ``A`` (and the other ``B``) or the reverse.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ParameterError(
            f"A and B must be square matrices of one common shape, got {A.shape} and {B.shape}"
        )
    rng = as_generator(seed)
    edges = graph.edges()
    coins = rng.random(len(edges)) < 0.5
    payoffs = {}
    orientation = []
    for (k, l), heads in zip(edges, coins):
        if heads:
            payoffs[(k, l)], payoffs[(l, k)] = A, B
            orientation.append([k, l])
        else:
            payoffs[(k, l)], payoffs[(l, k)] = B, A
            orientation.append([l, k])
    meta = {"orientation": orientation}
    meta.update(metadata or {})
    return PolymatrixGame(graph, [A.shape[0]] * graph.n, payoffs, meta)


def reward(game: PolymatrixGame, k: int, x) -> np.ndarray:
    """Expected reward of each of agent ``k``'s actions against ``x_{-k}``."""
    x = check_joint_strategy(x, game.offsets)
    r = np.zeros(game.action_counts[k])
    for l in game.graph.neighbors(k):
        r += game.half_edge_payoffs[(k, int(l))] @ game.block(x, int(l))
    return r


def payoff(game: PolymatrixGame, k: int, x) -> float:
    return float(game.block(x, k) @ reward(game, k, x))


def spectral_norm(M) -> float:
    """Largest singular value, as the square root of the top eigenvalue of M^T M."""
    M = np.asarray(M, dtype=float)
    top = np.linalg.eigvalsh(M.T @ M)[-1]
    return float(np.sqrt(max(top, 0.0)))


def delta_identical_interests(game: PolymatrixGame) -> float:
    """Maximum over edges of ||A[k, l] + A[l, k]^T||_2 (0 without edges)."""
    best = 0.0
    for k, l in game.graph.edges():
        S = game.half_edge_payoffs[(k, l)] + game.half_edge_payoffs[(l, k)].T
        best = max(best, spectral_norm(S))
    return best


def bimatrix_delta(A, B) -> float:
    return spectral_norm(np.asarray(A, dtype=float) + np.asarray(B, dtype=float).T)


def make_shapley(beta: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    A = np.array([[1.0, 0.0, beta], [beta, 1.0, 0.0], [0.0, beta, 1.0]])
    B = np.array([[-beta, 1.0, 0.0], [0.0, -beta, 1.0], [1.0, 0.0, -beta]])
    return A, B


_RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def make_sato(eps_x: float = 0.5, eps_y: float = -0.3) -> tuple[np.ndarray, np.ndarray]:
    """Rock-paper-scissors with tie payoffs ``eps_x`` (for A) and ``eps_y`` (for B)."""
    return _RPS + eps_x * np.eye(3), _RPS + eps_y * np.eye(3)


def make_zero_sum() -> tuple[np.ndarray, np.ndarray]:
    """Pairwise zero-sum pair used as the delta_I = 0 reference (Sato with zero ties)."""
    return make_sato(0.0, 0.0)


@dataclass(frozen=True)
class ConflictParts:
    """Sampled ingredients of a Conflict network game."""

    values: np.ndarray  # v_k, one per agent
    prizes: dict  # (k, l) -> P[k, l]
    costs: dict  # (k, l) -> c[k, l], length n_k


def make_conflict(graph: AdjacencyMatrix, action_counts=3, seed=None, *, return_parts=False):
    """Sample a Conflict network game.

    ``v_k ~ U[0, 1]`` per agent; for each edge ``P[k, l] ~ U[-5, 5]``
    elementwise with ``P[l, k] = 1 - P[k, l]^T``; costs ``c[k, l] ~ U[0, 1]``
    per half-edge and action. Payoffs are ``A[k, l] = v_k P[k, l] - c[k, l] 1^T``.
    """
    n = graph.n
    counts = [int(action_counts)] * n if np.ndim(action_counts) == 0 else [int(c) for c in action_counts]
    if len(counts) != n or any(c < 1 for c in counts):
        raise ParameterError("action_counts must be a positive int or one per agent")
    rng = as_generator(seed)
    v = rng.uniform(0.0, 1.0, size=n)
    prizes, costs, payoffs = {}, {}, {}
    for k, l in graph.edges():
        P = np.round(rng.uniform(-5.0, 5.0, size=(counts[k], counts[l])) * _CONFLICT_GRID) / _CONFLICT_GRID
        prizes[(k, l)] = P
        prizes[(l, k)] = 1.0 - P.T
        costs[(k, l)] = rng.uniform(0.0, 1.0, size=counts[k])
        costs[(l, k)] = rng.uniform(0.0, 1.0, size=counts[l])
    for (k, l), P in prizes.items():
        payoffs[(k, l)] = v[k] * P - costs[(k, l)][:, None]
    game = PolymatrixGame(graph, counts, payoffs, {"family": "conflict"})
    if return_parts:
        return game, ConflictParts(v, prizes, costs)
    return game
