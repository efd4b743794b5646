"""Boltzmann Q-learning and its continuous-time limit on polymatrix games.

The discrete algorithm updates every agent's Q-values from the expected
reward against the current joint strategy and then plays the softmax of
Q / T. The continuous Q-learning dynamic (replicator field plus an
entropy term) is integrated with fixed-step RK4.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    ContractError,
    DomainError,
    NumericalError,
    ParameterError,
    as_generator,
    check_exploration,
    check_joint_strategy,
    check_positive_int,
)
from .game import PolymatrixGame

__all__ = [
    "boltzmann",
    "QState",
    "DynamicsConfig",
    "Trajectory",
    "ConvergenceReport",
    "initial_state",
    "random_interior_strategy",
    "q_step",
    "run_discrete",
    "qld_vector_field",
    "integrate_qld",
    "assess_convergence",
    "QLearning",
    "QLDIntegrator",
]

logger = logging.getLogger(__name__)

STRATEGY_FLOOR = 1e-12
DOMAIN_FLOOR = 1e-300


def boltzmann(Q, T: float) -> np.ndarray:
    """Softmax of ``Q / T`` with max-subtraction."""
    if not np.isscalar(T) or not T > 0:
        raise ParameterError(f"exploration rate must be > 0, got {T!r}")
    Q = np.asarray(Q, dtype=float)
    # subtract before scaling: any exactly representable shift then cancels bit for bit
    e = np.exp((Q - Q.max()) / T)
    return e / e.sum()


def _block_softmax(z: np.ndarray, game: PolymatrixGame) -> np.ndarray:
    m = game.uniform_actions
    if m is not None:
        Z = z.reshape(game.n_agents, m)
        Z = Z - Z.max(axis=1, keepdims=True)
        E = np.exp(Z)
        return (E / E.sum(axis=1, keepdims=True)).ravel()
    starts = game.offsets[:-1]
    idx = game.agent_index
    z = z - np.maximum.reduceat(z, starts)[idx]
    e = np.exp(z)
    return e / np.add.reduceat(e, starts)[idx]


def _block_sum(v: np.ndarray, game: PolymatrixGame) -> np.ndarray:
    m = game.uniform_actions
    if m is not None:
        return v.reshape(game.n_agents, m).sum(axis=1)
    return np.add.reduceat(v, game.offsets[:-1])


@dataclass(frozen=True)
class QState:
    """Q-values and the Boltzmann strategies they induce (flat, per coordinate)."""

    Q: np.ndarray
    x: np.ndarray

    @classmethod
    def from_q(cls, game: PolymatrixGame, Q, exploration) -> "QState":
        T = check_exploration(exploration, game.n_agents)
        Q = np.asarray(Q, dtype=float)
        return cls(Q, _block_softmax(Q / T[game.agent_index], game))


@dataclass(frozen=True)
class DynamicsConfig:
    exploration: float | tuple = 1.0
    learning_rate: float | tuple = 0.1
    steps: int = 4000
    tail: int = 300
    dt: float = 0.01
    var_threshold: float = 1e-2
    rel_threshold: float = 1e-5

    def __post_init__(self):
        check_positive_int(self.steps, "steps")
        check_positive_int(self.tail, "tail")
        if self.tail > self.steps:
            raise ParameterError(f"tail ({self.tail}) must not exceed steps ({self.steps})")
        T = np.asarray(self.exploration, dtype=float)
        if not np.all(np.isfinite(T)) or np.any(T <= 0):
            raise ParameterError(f"exploration must be > 0, got {self.exploration!r}")
        a = np.asarray(self.learning_rate, dtype=float)
        if np.any(a <= 0) or np.any(a >= 1):
            raise ParameterError(f"learning_rate must lie in (0, 1), got {self.learning_rate!r}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not (self.var_threshold > 0 and self.rel_threshold > 0):
            raise ParameterError("convergence thresholds must be > 0")
        if T.ndim:
            object.__setattr__(self, "exploration", tuple(float(t) for t in T))
        if a.ndim:
            object.__setattr__(self, "learning_rate", tuple(float(v) for v in a))

    def exploration_vector(self, n_agents: int) -> np.ndarray:
        return check_exploration(self.exploration, n_agents)

    def learning_rate_vector(self, n_agents: int) -> np.ndarray:
        a = np.asarray(self.learning_rate, dtype=float)
        if a.ndim == 0:
            return np.full(n_agents, float(a))
        if a.shape != (n_agents,):
            raise ParameterError(f"learning_rate needs {n_agents} entries, got {a.shape}")
        return a


@dataclass
class Trajectory:
    """Recorded joint strategies; row ``i`` is the state after step ``first_step + i``."""

    strategies: np.ndarray
    offsets: np.ndarray
    first_step: int = 1
    final_q: np.ndarray | None = None

    def __len__(self):
        return self.strategies.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.strategies[-1]

    @property
    def steps(self) -> np.ndarray:
        return self.first_step + np.arange(len(self))

    def to_csv(self, path) -> None:
        """One row per (step, agent, action) with columns step,agent,action,probability."""
        agents = np.repeat(np.arange(len(self.offsets) - 1), np.diff(self.offsets))
        actions = np.arange(self.offsets[-1]) - self.offsets[:-1][agents]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "agent", "action", "probability"])
            for step, row in zip(self.steps, self.strategies):
                w.writerows(zip([int(step)] * row.size, agents.tolist(), actions.tolist(), row.tolist()))


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    mean_variance: float
    relative_difference: float
    per_agent_max_abs_variation: tuple = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_agent_max_abs_variation"] = list(self.per_agent_max_abs_variation)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text


def random_interior_strategy(game: PolymatrixGame, seed=None) -> np.ndarray:
    """Per-agent Dirichlet(1, ..., 1) draw, i.e. uniform on each simplex."""
    rng = as_generator(seed)
    x = np.concatenate([rng.dirichlet(np.ones(n)) for n in game.action_counts])
    # Dirichlet can underflow to exact zeros for tiny gamma draws
    x = np.maximum(x, DOMAIN_FLOOR * 1e10)
    return x / _block_sum(x, game)[game.agent_index]


def initial_state(game: PolymatrixGame, exploration, seed=None, x0=None) -> QState:
    """Q(0) = T ln x(0), so that the Boltzmann map reproduces x(0)."""
    T = check_exploration(exploration, game.n_agents)
    x = random_interior_strategy(game, seed) if x0 is None else np.asarray(x0, dtype=float)
    check_joint_strategy(x, game.offsets)
    Q = T[game.agent_index] * np.log(np.maximum(x, DOMAIN_FLOOR))
    return QState.from_q(game, Q, T)


def q_step(game: PolymatrixGame, state: QState, config: DynamicsConfig) -> QState:
    """One synchronous expected-reward Q-update followed by Boltzmann selection."""
    idx = game.agent_index
    T = config.exploration_vector(game.n_agents)[idx]
    a = config.learning_rate_vector(game.n_agents)[idx]
    Q = (1.0 - a) * state.Q + a * game.rewards(state.x)
    return QState(Q, _block_softmax(Q / T, game))


def run_discrete(game: PolymatrixGame, config: DynamicsConfig, init: QState | None = None,
                 *, seed=None, keep: int | None = None) -> Trajectory:
    """Iterate ``q_step`` ``config.steps`` times and record x after each step.

    ``keep`` limits storage to the last ``keep`` snapshots.
    """
    if init is None:
        init = initial_state(game, config.exploration, seed)
    idx = game.agent_index
    T = config.exploration_vector(game.n_agents)[idx]
    a = config.learning_rate_vector(game.n_agents)[idx]
    keep = config.steps if keep is None else min(int(keep), config.steps)
    M = game.payoff_matrix
    Q = np.array(init.Q, dtype=float)
    x = np.array(init.x, dtype=float)
    out = np.empty((keep, game.dim))
    start = config.steps - keep
    # overflow is reported through NumericalError, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(config.steps):
            Q = (1.0 - a) * Q + a * (M @ x)
            if not np.isfinite(Q).all():
                raise NumericalError(f"non-finite Q-values at iteration {t + 1}", step=t + 1)
            x = _block_softmax(Q / T, game)
            if t >= start:
                out[t - start] = x
    return Trajectory(out, game.offsets.copy(), first_step=start + 1, final_q=Q)


def _field(game: PolymatrixGame, x: np.ndarray, T: np.ndarray) -> np.ndarray:
    # T is per coordinate; x must be strictly positive
    r = game.payoff_matrix @ x
    idx = game.agent_index
    logx = np.log(x)
    avg_r = _block_sum(x * r, game)[idx]
    neg_entropy = _block_sum(x * logx, game)[idx]
    return x * (r - avg_r + T * (neg_entropy - logx))


def qld_vector_field(game: PolymatrixGame, x, exploration) -> np.ndarray:
    """Time derivative of the joint strategy under the Q-learning dynamic."""
    x = check_joint_strategy(x, game.offsets)
    if np.any(x <= DOMAIN_FLOOR):
        raise DomainError("the Q-learning field is only defined in the simplex interior")
    T = check_exploration(exploration, game.n_agents)
    return _field(game, x, T[game.agent_index])


def _project(x: np.ndarray, game: PolymatrixGame) -> np.ndarray:
    x = np.maximum(x, STRATEGY_FLOOR)
    return x / _block_sum(x, game)[game.agent_index]


def integrate_qld(game: PolymatrixGame, config: DynamicsConfig, x0=None, *, seed=None,
                  keep: int | None = None) -> Trajectory:
    """Fixed-step RK4 on the Q-learning field, projecting back onto the simplex.

    After each step entries are floored at 1e-12 and every agent's block is
    renormalized to sum to one.
    """
    if x0 is None:
        x0 = random_interior_strategy(game, seed)
    x = check_joint_strategy(np.array(x0, dtype=float), game.offsets)
    if np.any(x <= DOMAIN_FLOOR):
        raise DomainError("integrate_qld needs an interior starting point")
    T = config.exploration_vector(game.n_agents)[game.agent_index]
    h = config.dt
    keep = config.steps if keep is None else min(int(keep), config.steps)
    out = np.empty((keep, game.dim))
    start = config.steps - keep

    def f(y):
        return _field(game, np.maximum(y, STRATEGY_FLOOR), T)

    for t in range(config.steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(x).all():
            raise NumericalError(f"non-finite state at integration step {t + 1}", step=t + 1)
        x = _project(x, game)
        if t >= start:
            out[t - start] = x
    return Trajectory(out, game.offsets.copy(), first_step=start + 1)


def assess_convergence(traj: Trajectory, tail: int = 300, var_threshold: float = 1e-2,
                       rel_threshold: float = 1e-5) -> ConvergenceReport:
    """Variance / relative-difference test on the last ``tail`` snapshots."""
    if tail < 1:
        raise ParameterError("tail must contain at least one snapshot")
    if tail > len(traj):
        raise ParameterError(f"tail ({tail}) exceeds trajectory length ({len(traj)})")
    window = traj.strategies[-tail:]
    hi = window.max(axis=0)
    lo = window.min(axis=0)
    spread = hi - lo
    # centring on the first row keeps a constant window at exactly zero variance
    mean_var = float((window - window[0]).var(axis=0).mean())
    rel = np.divide(spread, hi, out=np.zeros_like(spread), where=hi > 0)
    rel_diff = float(rel.max())
    per_agent = tuple(float(v) for v in np.maximum.reduceat(spread, traj.offsets[:-1]))
    converged = bool(mean_var < var_threshold and rel_diff < rel_threshold)
    return ConvergenceReport(converged, mean_var, rel_diff, per_agent)


# ---------------------------------------------------------------- estimators


class _DynamicsEstimator(BaseEstimator):
    def _config(self) -> DynamicsConfig:
        return DynamicsConfig(
            exploration=self.exploration,
            learning_rate=getattr(self, "learning_rate", 0.1),
            steps=self.steps,
            tail=self.tail,
            dt=getattr(self, "dt", 0.01),
            var_threshold=self.var_threshold,
            rel_threshold=self.rel_threshold,
        )

    def _finish(self, traj: Trajectory, game: PolymatrixGame):
        cfg = self._config()
        self.trajectory_ = traj
        self.report_ = assess_convergence(traj, cfg.tail, cfg.var_threshold, cfg.rel_threshold)
        self.converged_ = self.report_.converged
        self.strategy_ = traj.final.copy()
        self.n_agents_ = game.n_agents
        return self

    def transform(self, game: PolymatrixGame) -> np.ndarray:
        """Final joint strategy reached by the fitted run."""
        check_is_fitted(self, "strategy_")
        if game.n_agents != self.n_agents_:
            raise ContractError("game does not match the fitted one")
        return self.strategy_


class QLearning(_DynamicsEstimator):
    """Discrete Boltzmann Q-learning as an estimator.

    ``fit(game)`` runs the algorithm and sets ``trajectory_``, ``report_``,
    ``converged_``, ``strategy_`` and ``q_values_``.
    """

    def __init__(self, exploration=1.0, learning_rate=0.1, steps=4000, tail=300,
                 var_threshold=1e-2, rel_threshold=1e-5, record="all", random_state=None):
        self.exploration = exploration
        self.learning_rate = learning_rate
        self.steps = steps
        self.tail = tail
        self.var_threshold = var_threshold
        self.rel_threshold = rel_threshold
        self.record = record
        self.random_state = random_state

    def fit(self, game: PolymatrixGame, y=None, init: QState | None = None):
        cfg = self._config()
        if init is None:
            init = initial_state(game, cfg.exploration, self.random_state)
        keep = cfg.tail if self.record == "tail" else None
        traj = run_discrete(game, cfg, init, keep=keep)
        self.q_values_ = traj.final_q
        return self._finish(traj, game)


class QLDIntegrator(_DynamicsEstimator):
    """RK4 integration of the continuous Q-learning dynamic as an estimator."""

    def __init__(self, exploration=1.0, dt=0.01, steps=4000, tail=300,
                 var_threshold=1e-2, rel_threshold=1e-5, record="all", random_state=None):
        self.exploration = exploration
        self.dt = dt
        self.steps = steps
        self.tail = tail
        self.var_threshold = var_threshold
        self.rel_threshold = rel_threshold
        self.record = record
        self.random_state = random_state

    def fit(self, game: PolymatrixGame, y=None, x0=None):
        cfg = self._config()
        keep = cfg.tail if self.record == "tail" else None
        traj = integrate_qld(game, cfg, x0, seed=self.random_state, keep=keep)
        return self._finish(traj, game)
