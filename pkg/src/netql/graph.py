"""Random interaction networks and spectral-radius bounds.

Networks are stored as read-only dense adjacency matrices. Two random
models are supported: Erdős–Rényi (every pair linked independently with
probability ``p``) and the stochastic block model (probability ``p_c``
inside community ``c`` and ``q`` across communities).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import (
    ContractError,
    ParameterError,
    as_generator,
    check_positive_int,
    check_probability,
    check_symmetric_binary,
)

__all__ = [
    "AdjacencyMatrix",
    "ERParams",
    "SBParams",
    "SpectralBound",
    "sample_er",
    "sample_sb",
    "spectral_radius",
    "er_bound",
    "sb_bound",
    "empirical_bound_coverage",
    "complete_graph",
    "path_graph",
    "empty_graph",
    "read_edge_list",
    "write_edge_list",
    "read_dense_csv",
    "write_dense_csv",
]

DENSE_EIGEN_LIMIT = 512


class AdjacencyMatrix:
    """Symmetric 0/1 matrix with zero diagonal.

    The underlying array is made read-only so instances can be shared
    between threads.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        G = check_symmetric_binary(entries)
        G = np.array(G, dtype=np.int8, copy=True)
        G.setflags(write=False)
        self._entries = G

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    def degrees(self) -> np.ndarray:
        return self._entries.sum(axis=1).astype(int)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(k, l)`` with ``k < l``, in row-major order."""
        ks, ls = np.nonzero(np.triu(self._entries, 1))
        return [(int(k), int(l)) for k, l in zip(ks, ls)]

    def neighbors(self, k: int) -> np.ndarray:
        return np.flatnonzero(self._entries[k])

    def to_float(self) -> np.ndarray:
        return self._entries.astype(float)

    def __eq__(self, other):
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return np.array_equal(self._entries, other._entries)

    def __hash__(self):
        return hash((self.n, self._entries.tobytes()))

    def __repr__(self):
        return f"AdjacencyMatrix(n={self.n}, edges={len(self.edges())})"


@dataclass(frozen=True)
class ERParams:
    n: int
    p: float

    def __post_init__(self):
        check_positive_int(self.n, "n", minimum=2)
        check_probability(self.p, "p")


@dataclass(frozen=True)
class SBParams:
    community_sizes: tuple[int, ...]
    p_within: tuple[float, ...]
    q_between: float

    def __post_init__(self):
        sizes = tuple(int(check_positive_int(s, "community size")) for s in self.community_sizes)
        probs = tuple(check_probability(p, "p_within") for p in self.p_within)
        if len(sizes) == 0:
            raise ParameterError("at least one community is required")
        if len(probs) != len(sizes):
            raise ParameterError(
                f"got {len(sizes)} community sizes but {len(probs)} within-community probabilities"
            )
        check_probability(self.q_between, "q_between")
        object.__setattr__(self, "community_sizes", sizes)
        object.__setattr__(self, "p_within", probs)
        object.__setattr__(self, "q_between", float(self.q_between))
        if sum(sizes) < 2:
            raise ParameterError("the network needs at least two nodes")

    @classmethod
    def equal(cls, n: int, communities: int, p_within, q_between: float) -> "SBParams":
        """Build ``communities`` blocks of size ``n // communities``.

        ``p_within`` may be a scalar (shared by all blocks) or one value per block.
        """
        if n % communities:
            raise ParameterError(f"n={n} is not divisible into {communities} equal communities")
        if np.ndim(p_within) == 0:
            p_within = [float(p_within)] * communities
        return cls(tuple([n // communities] * communities), tuple(p_within), q_between)

    @property
    def n(self) -> int:
        return sum(self.community_sizes)

    @property
    def n_communities(self) -> int:
        return len(self.community_sizes)

    @property
    def equal_sizes(self) -> bool:
        return len(set(self.community_sizes)) == 1

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_communities), self.community_sizes)

    def probability_matrix(self) -> np.ndarray:
        lab = self.labels()
        p = np.asarray(self.p_within)[lab]
        P = np.where(lab[:, None] == lab[None, :], p[:, None], self.q_between)
        np.fill_diagonal(P, 0.0)
        return P


@dataclass(frozen=True)
class SpectralBound:
    value: float
    epsilon: float
    model: str
    # (N-1)p for ER, maximal expected block degree for SB
    leading_term: float = field(default=float("nan"))

    def __post_init__(self):
        if not self.value >= 0:
            raise ParameterError(f"bound value must be nonnegative, got {self.value}")


def _sample_upper(P: np.ndarray, rng: np.random.Generator) -> AdjacencyMatrix:
    n = P.shape[0]
    iu = np.triu_indices(n, 1)
    draws = rng.random(iu[0].size) < P[iu]
    G = np.zeros((n, n), dtype=np.int8)
    G[iu] = draws
    G = G + G.T
    return AdjacencyMatrix(G)


def sample_er(params: ERParams, seed=None) -> AdjacencyMatrix:
    """Draw an Erdős–Rényi graph; only the upper triangle is sampled."""
    if not isinstance(params, ERParams):
        raise ParameterError("params must be an ERParams instance")
    rng = as_generator(seed)
    P = np.full((params.n, params.n), params.p)
    return _sample_upper(P, rng)


def sample_sb(params: SBParams, seed=None) -> AdjacencyMatrix:
    """Draw a stochastic block model graph with contiguous community labels."""
    if not isinstance(params, SBParams):
        raise ParameterError("params must be an SBParams instance")
    rng = as_generator(seed)
    return _sample_upper(params.probability_matrix(), rng)


def _power_iteration(G: np.ndarray, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    # shift makes the top eigenvalue strictly dominant for bipartite graphs
    shift = 1.0
    M = G + shift * np.eye(G.shape[0])
    v = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
    lam = shift
    for _ in range(max_iter):
        w = M @ v
        lam = float(v @ w)
        # for symmetric M some eigenvalue lies within the residual norm of lam
        if np.linalg.norm(w - lam * v) <= tol:
            break
        v = w / np.linalg.norm(w)
    return max(lam - shift, 0.0)


def spectral_radius(G) -> float:
    """Largest eigenvalue of a symmetric adjacency matrix."""
    A = G.entries if isinstance(G, AdjacencyMatrix) else np.asarray(G)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {A.shape}")
    A = A.astype(float)
    if not np.array_equal(A, A.T):
        raise ContractError("spectral_radius requires a symmetric matrix")
    n = A.shape[0]
    if n == 0:
        return 0.0
    if n <= DENSE_EIGEN_LIMIT:
        return max(float(np.linalg.eigvalsh(A)[-1]), 0.0)
    return _power_iteration(A)


def _log_term(n: int, epsilon: float) -> float:
    return math.log(2 * n / epsilon)


def er_bound(n: int, p: float, epsilon: float) -> SpectralBound:
    """High-probability upper bound on the spectral radius of an ER graph."""
    check_positive_int(n, "n", minimum=2)
    p = check_probability(p, "p")
    epsilon = check_probability(epsilon, "epsilon")
    L = _log_term(n, epsilon)
    mean = (n - 1) * p
    value = mean + math.sqrt(2 * (n - 1) * p * (1 - p) * L) + (2.0 / 3.0) * L
    return SpectralBound(value, epsilon, "ER", mean)


def sb_bound(params: SBParams, epsilon: float, *, allow_unequal: bool = False) -> SpectralBound:
    """High-probability upper bound on the spectral radius of an SB graph.

    Communities must share one size unless ``allow_unequal`` is set, in
    which case the mean and variance terms are the maxima over blocks of
    ``(N_c - 1) p_c + (N - N_c) q`` and its Bernoulli-variance analogue.
    The two forms coincide when all sizes are equal.
    """
    epsilon = check_probability(epsilon, "epsilon")
    n = params.n
    q = params.q_between
    L = _log_term(n, epsilon)
    if params.equal_sizes:
        m = params.community_sizes[0]
        p_max = max(params.p_within)
        var_max = max(p * (1 - p) for p in params.p_within)
        mean = (n - m) * q + (m - 1) * p_max
        var = (n - m) * q * (1 - q) + (m - 1) * var_max
    elif allow_unequal:
        sizes = params.community_sizes
        mean = max((s - 1) * p + (n - s) * q for s, p in zip(sizes, params.p_within))
        var = max(
            (s - 1) * p * (1 - p) + (n - s) * q * (1 - q)
            for s, p in zip(sizes, params.p_within)
        )
    else:
        raise ParameterError(
            "sb_bound needs equal community sizes; pass allow_unequal=True for the general form"
        )
    value = mean + math.sqrt(2 * var * L) + (2.0 / 3.0) * L
    return SpectralBound(value, epsilon, "SB", mean)


def empirical_bound_coverage(params, epsilon: float, trials: int, seed=None) -> float:
    """Fraction of sampled graphs whose spectral radius stays below the bound."""
    check_positive_int(trials, "trials", minimum=100)
    if isinstance(params, ERParams):
        bound = er_bound(params.n, params.p, epsilon).value
        sampler = sample_er
    elif isinstance(params, SBParams):
        bound = sb_bound(params, epsilon, allow_unequal=True).value
        sampler = sample_sb
    else:
        raise ParameterError("params must be ERParams or SBParams")
    rng = as_generator(seed)
    hits = sum(spectral_radius(sampler(params, rng)) <= bound for _ in range(trials))
    return hits / trials


def complete_graph(n: int) -> AdjacencyMatrix:
    return AdjacencyMatrix(np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8))


def empty_graph(n: int) -> AdjacencyMatrix:
    return AdjacencyMatrix(np.zeros((n, n), dtype=np.int8))


def path_graph(n: int) -> AdjacencyMatrix:
    G = np.zeros((n, n), dtype=np.int8)
    idx = np.arange(n - 1)
    G[idx, idx + 1] = 1
    G[idx + 1, idx] = 1
    return AdjacencyMatrix(G)


def from_edges(n: int, edges: Sequence[Sequence[int]]) -> AdjacencyMatrix:
    G = np.zeros((n, n), dtype=np.int8)
    for k, l in edges:
        if k == l:
            raise ContractError(f"self-loop on node {k}")
        G[k, l] = G[l, k] = 1
    return AdjacencyMatrix(G)


# ---------------------------------------------------------------- serialization
# Edge lists carry a "# n=<N>" header so isolated trailing nodes survive.


def write_edge_list(G: AdjacencyMatrix, path) -> None:
    lines = [f"# n={G.n}"] + [f"{k} {l}" for k, l in G.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path, n: int | None = None) -> AdjacencyMatrix:
    edges = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n=") and n is None:
                n = int(body[2:])
            continue
        k, l = line.split()
        edges.append((int(k), int(l)))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return from_edges(n, edges)


def write_dense_csv(G: AdjacencyMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(G.entries.tolist())


def read_dense_csv(path) -> AdjacencyMatrix:
    with open(path, newline="") as fh:
        rows = [[int(v) for v in row] for row in csv.reader(fh) if row]
    return AdjacencyMatrix(np.array(rows, dtype=np.int8).reshape(len(rows), -1))
