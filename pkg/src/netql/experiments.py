"""Seeded Monte Carlo sweeps: divergence heatmaps, convergence boundaries
and per-community variation histograms.

Every run draws a fresh graph, payoff orientation and initial condition
from a seed derived from ``(base_seed, cell indices, run index)``, so
results do not depend on how work is scheduled across processes.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from ._version import __version__
from ._validation import NumericalError, ParameterError
from .config import GameFamily, derive_seed, network_params, sample_network
from .dynamics import DynamicsConfig, assess_convergence, initial_state, run_discrete
from .equilibrium import theoretical_threshold
from .graph import SBParams, sample_sb

__all__ = [
    "SweepConfig",
    "HistogramConfig",
    "HeatmapCell",
    "HeatmapResult",
    "BoundaryResult",
    "HistogramResult",
    "run_heatmap",
    "run_boundary",
    "run_histogram",
    "compare_to_theory",
    "write_manifest",
]

DEFAULT_T_GRID = tuple(float(t) for t in np.round(np.linspace(0.05, 4.25, 22), 10))
DEFAULT_P_GRID = tuple(float(p) for p in np.round(np.linspace(0.05, 0.25, 5), 10))
HEATMAP_RUNS = 20
BOUNDARY_RUNS = 50


@dataclass(frozen=True)
class SweepConfig:
    game: GameFamily = field(default_factory=lambda: GameFamily("sato"))
    network_model: str = "ER"
    T_grid: tuple = DEFAULT_T_GRID
    p_grid: tuple = DEFAULT_P_GRID
    q_values: tuple = (0.1,)
    N_values: tuple = (20,)
    runs_per_cell: int | None = None
    community_size: int = 5
    steps: int = 4000
    tail: int = 300
    learning_rate: float = 0.1
    var_threshold: float = 1e-2
    rel_threshold: float = 1e-5
    base_seed: int = 0

    def __post_init__(self):
        model = self.network_model.upper()
        if model not in ("ER", "SB"):
            raise ParameterError(f"network_model must be ER or SB, got {self.network_model!r}")
        object.__setattr__(self, "network_model", model)
        for name in ("T_grid", "p_grid", "q_values", "N_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ParameterError(f"{name} must not be empty")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        if self.runs_per_cell is not None and self.runs_per_cell < 1:
            raise ParameterError("runs_per_cell must be >= 1")
        if any(t <= 0 for t in self.T_grid):
            raise ParameterError("T_grid values must be > 0")
        # validates steps/tail/thresholds
        self.dynamics(1.0)

    @property
    def q_axis(self) -> tuple:
        return self.q_values if self.network_model == "SB" else (None,)

    def runs(self, default: int) -> int:
        return default if self.runs_per_cell is None else int(self.runs_per_cell)

    def dynamics(self, T: float) -> DynamicsConfig:
        return DynamicsConfig(exploration=float(T), learning_rate=self.learning_rate,
                              steps=self.steps, tail=self.tail,
                              var_threshold=self.var_threshold, rel_threshold=self.rel_threshold)

    def network(self, N: int, p: float, q):
        return network_params(self.network_model, N, p, q, self.community_size)

    def to_dict(self) -> dict:
        return {
            "game": self.game.to_dict(),
            "network_model": self.network_model,
            "T_grid": list(self.T_grid),
            "p_grid": list(self.p_grid),
            "q_values": list(self.q_values),
            "N_values": list(self.N_values),
            "runs_per_cell": self.runs_per_cell,
            "community_size": self.community_size,
            "steps": self.steps,
            "tail": self.tail,
            "learning_rate": self.learning_rate,
            "var_threshold": self.var_threshold,
            "rel_threshold": self.rel_threshold,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        d = dict(d)
        if "game" in d and not isinstance(d["game"], GameFamily):
            d["game"] = GameFamily.from_dict(d["game"])
        return cls(**d)


def _run_once(game_family: GameFamily, net, cfg: DynamicsConfig, seed: int):
    """Simulate one random instance; returns the tail convergence report or None on overflow."""
    rng = np.random.default_rng(seed)
    graph = sample_network(net, rng)
    game = game_family.build(graph, rng)
    init = initial_state(game, cfg.exploration, rng)
    try:
        traj = run_discrete(game, cfg, init, keep=cfg.tail)
    except NumericalError:
        return None
    return assess_convergence(traj, cfg.tail, cfg.var_threshold, cfg.rel_threshold)


def _pool_map(fn, tasks: list, threads: int):
    if threads is None or threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


# ---------------------------------------------------------------- heatmap


@dataclass(frozen=True)
class HeatmapCell:
    N: int
    p: float
    q: float | None
    T: float
    runs: int
    diverged: int
    seeds: tuple

    @property
    def proportion(self) -> float:
        return self.diverged / self.runs


@dataclass
class HeatmapResult:
    cells: list

    def proportion(self, N, p, T, q=None) -> float:
        for c in self.cells:
            if c.N == N and math.isclose(c.p, p) and math.isclose(c.T, T) and (
                    q is None or c.q is None or math.isclose(c.q, q)):
                return c.proportion
        raise KeyError((N, p, q, T))

    def rows(self) -> list[list]:
        return [[c.N, c.p, "" if c.q is None else c.q, c.T, c.runs, c.diverged, c.proportion]
                for c in self.cells]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "p", "q", "T", "runs", "diverged", "proportion"])
            w.writerows(self.rows())


def _heatmap_task(args):
    family, net, cfg, seed = args
    report = _run_once(family, net, cfg, seed)
    return report is None or not report.converged


def run_heatmap(config: SweepConfig, threads: int = 1) -> HeatmapResult:
    runs = config.runs(HEATMAP_RUNS)
    keys, tasks = [], []
    for iN, N in enumerate(config.N_values):
        for ip, p in enumerate(config.p_grid):
            for iq, q in enumerate(config.q_axis):
                net = config.network(N, p, q)
                for iT, T in enumerate(config.T_grid):
                    cfg = config.dynamics(T)
                    seeds = tuple(derive_seed(config.base_seed, iN, ip, iq, iT, r) for r in range(runs))
                    keys.append((N, p, q, T, seeds))
                    tasks.extend((config.game, net, cfg, s) for s in seeds)
    flags = _pool_map(_heatmap_task, tasks, threads)
    cells, pos = [], 0
    for N, p, q, T, seeds in keys:
        diverged = int(sum(flags[pos : pos + runs]))
        pos += runs
        cells.append(HeatmapCell(N, float(p), None if q is None else float(q), float(T), runs, diverged, seeds))
    return HeatmapResult(cells)


# ---------------------------------------------------------------- boundary


@dataclass
class BoundaryResult:
    """Per (N, p, q): smallest grid T at which every run converged, or None."""

    rows: list  # (N, p, q, min_T or None)

    def min_T(self, N, p, q=None):
        for n, pp, qq, t in self.rows:
            if n == N and math.isclose(pp, p) and (q is None or qq is None or math.isclose(qq, q)):
                return t
        raise KeyError((N, p, q))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "p", "q", "min_T_all_converged"])
            for N, p, q, t in self.rows:
                w.writerow([N, p, "" if q is None else q, "none" if t is None else t])


def _boundary_task(args):
    family, net, config, idx, runs = args
    for iT, T in enumerate(config.T_grid):
        cfg = config.dynamics(T)
        ok = True
        for r in range(runs):
            report = _run_once(family, net, cfg, derive_seed(config.base_seed, *idx, iT, r))
            if report is None or not report.converged:
                ok = False
                break
        if ok:
            return float(T)
    return None


def run_boundary(config: SweepConfig, threads: int = 1) -> BoundaryResult:
    if list(config.T_grid) != sorted(config.T_grid):
        raise ParameterError("T_grid must be sorted ascending for boundary scans")
    runs = config.runs(BOUNDARY_RUNS)
    keys, tasks = [], []
    for iN, N in enumerate(config.N_values):
        for ip, p in enumerate(config.p_grid):
            for iq, q in enumerate(config.q_axis):
                keys.append((N, float(p), None if q is None else float(q)))
                tasks.append((config.game, config.network(N, p, q), config, (iN, ip, iq), runs))
    found = _pool_map(_boundary_task, tasks, threads)
    return BoundaryResult([(*k, t) for k, t in zip(keys, found)])


# ---------------------------------------------------------------- histogram


@dataclass(frozen=True)
class HistogramConfig:
    game: GameFamily = field(default_factory=lambda: GameFamily("sato"))
    community_sizes: tuple = (40, 40, 40, 40, 40)
    p_within: tuple = (0.05, 0.10, 0.15, 0.20, 0.25)
    q: float = 0.1
    T: float = 0.6
    simulations: int = 1024
    steps: int = 4000
    tail: int = 300
    learning_rate: float = 0.1
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "community_sizes", tuple(int(s) for s in self.community_sizes))
        object.__setattr__(self, "p_within", tuple(float(p) for p in self.p_within))
        if len(self.community_sizes) != len(self.p_within):
            raise ParameterError("community_sizes and p_within must have the same length")
        if self.simulations < 1:
            raise ParameterError("simulations must be >= 1")
        self.network()
        self.dynamics()

    def network(self) -> SBParams:
        return SBParams(self.community_sizes, self.p_within, self.q)

    def dynamics(self) -> DynamicsConfig:
        return DynamicsConfig(exploration=self.T, learning_rate=self.learning_rate,
                              steps=self.steps, tail=self.tail)

    def to_dict(self) -> dict:
        return {
            "game": self.game.to_dict(),
            "community_sizes": list(self.community_sizes),
            "p_within": list(self.p_within),
            "q": self.q,
            "T": self.T,
            "simulations": self.simulations,
            "steps": self.steps,
            "tail": self.tail,
            "learning_rate": self.learning_rate,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HistogramConfig":
        d = dict(d)
        if "game" in d and not isinstance(d["game"], GameFamily):
            d["game"] = GameFamily.from_dict(d["game"])
        return cls(**d)


@dataclass
class HistogramResult:
    """Per-agent tail variation, grouped by community at the finest grain."""

    p_within: tuple
    records: list  # (community, simulation, agent, variation)

    def by_community(self) -> list[np.ndarray]:
        out = [[] for _ in self.p_within]
        for c, _, _, v in self.records:
            out[c].append(v)
        return [np.asarray(v) for v in out]

    def medians(self) -> np.ndarray:
        return np.array([np.median(v) for v in self.by_community()])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["community", "p_within", "simulation", "agent", "variation"])
            w.writerows([c, self.p_within[c], s, a, v] for c, s, a, v in self.records)


def _histogram_task(args):
    config, sim = args
    rng = np.random.default_rng(derive_seed(config.base_seed, sim))
    net = config.network()
    graph = sample_sb(net, rng)
    game = config.game.build(graph, rng)
    cfg = config.dynamics()
    init = initial_state(game, cfg.exploration, rng)
    try:
        traj = run_discrete(game, cfg, init, keep=cfg.tail)
        variation = assess_convergence(traj, cfg.tail).per_agent_max_abs_variation
    except NumericalError:
        variation = (1.0,) * graph.n
    labels = net.labels()
    return [(int(labels[a]), sim, a, float(v)) for a, v in enumerate(variation)]


def run_histogram(config: HistogramConfig, threads: int = 1) -> HistogramResult:
    chunks = _pool_map(_histogram_task, [(config, s) for s in range(config.simulations)], threads)
    return HistogramResult(config.p_within, [rec for chunk in chunks for rec in chunk])


# ---------------------------------------------------------------- theory


def compare_to_theory(config: SweepConfig, epsilon: float = 0.05, boundary: BoundaryResult | None = None,
                      threads: int = 1, use_literal: bool = False) -> list[dict]:
    """Join the empirical boundary with the spectral-bound thresholds.

    Both threshold forms are reported; ``ratio`` divides the empirical
    boundary by the delta_I-scaled one, or by the bare bound when
    ``use_literal``. The theoretical columns are NaN for families without a
    common bimatrix game (Conflict), where delta_I is not fixed in advance.
    """
    if boundary is None:
        boundary = run_boundary(config, threads)
    delta = config.game.delta
    rows = []
    for N, p, q, t in boundary.rows:
        net = config.network(N, p, q)
        if delta is None:
            theory = literal = float("nan")
        else:
            theory = theoretical_threshold(delta, net, epsilon)
            literal = theoretical_threshold(delta, net, epsilon, literal=True)
        empirical = float("nan") if t is None else t
        ref = literal if use_literal else theory
        if ref > 0:
            ratio = empirical / ref
        elif ref == 0:
            ratio = float("inf") if empirical > 0 else float("nan")
        else:
            ratio = float("nan")
        rows.append({"N": N, "p": p, "q": q, "empirical_min_T": empirical,
                     "threshold": theory, "literal_threshold": literal, "ratio": ratio})
    return rows


def write_comparison_csv(rows: Sequence[dict], path) -> None:
    cols = ["N", "p", "q", "empirical_min_T", "threshold", "literal_threshold", "ratio"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows([["" if r[c] is None else r[c] for c in cols] for r in rows])


def write_manifest(path, command: str, config: dict, base_seed: int, outputs: Sequence[str]) -> dict:
    manifest = {
        "manifest_version": 1,
        "command": command,
        "config": config,
        "base_seed": base_seed,
        "tool_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": list(outputs),
    }
    Path(path).write_text(json.dumps(manifest, indent=1))
    return manifest
