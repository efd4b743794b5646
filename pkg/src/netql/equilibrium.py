"""Quantal response equilibria and monotonicity diagnostics.

The QRE is computed by damped fixed-point iteration of the logit
response map. The pseudo-Jacobian of the entropy-regularised game and
the smallest eigenvalue of its symmetric part give a pointwise
certificate that the game is strongly monotone, as required for a unique
QRE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    DomainError,
    ParameterError,
    check_exploration,
    check_joint_strategy,
)
from .dynamics import DOMAIN_FLOOR, _block_softmax, _block_sum
from .game import (
    PolymatrixGame,
    bimatrix_delta,
    delta_identical_interests,
    spectral_norm,
    uniform_strategy,
)
from .graph import AdjacencyMatrix, ERParams, SBParams, er_bound, sb_bound, spectral_radius

__all__ = [
    "logit_response",
    "QREResult",
    "qre_fixed_point",
    "safe_damping",
    "regularized_payoff",
    "pseudo_gradient",
    "pseudo_jacobian",
    "MonotonicityCertificate",
    "monotonicity_margin",
    "theoretical_threshold",
    "QRESolver",
]

logger = logging.getLogger(__name__)

def logit_response(game: PolymatrixGame, x, exploration) -> np.ndarray:
    """Boltzmann response of every agent to the rewards induced by ``x``."""
    T = check_exploration(exploration, game.n_agents)
    r = game.rewards(x)
    return _block_softmax(r / T[game.agent_index], game)


@dataclass(frozen=True)
class QREResult:
    strategy: np.ndarray
    residual: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def safe_damping(game: PolymatrixGame, exploration, damping: float = 0.5) -> float:
    """Cap ``damping`` at ``1 / (1 + L**2)`` with ``L = ||M||_2 / (2 min_k T_k)``.

    ``L`` bounds the spectrum of the logit map's Jacobian, and the cap keeps
    the damped map stable around purely rotational modes.
    """
    T = check_exploration(exploration, game.n_agents)
    if game.dim == 0 or not game.half_edge_payoffs:
        return damping
    lip = spectral_norm(game.payoff_matrix) / (2.0 * T.min())
    return min(damping, 1.0 / (1.0 + lip * lip))


def qre_fixed_point(game: PolymatrixGame, exploration, x0=None, damping: float = 0.5,
                    tol: float = 1e-10, max_iter: int = 10_000) -> QREResult:
    """Damped logit iteration ``x <- (1 - d) x + d * logit(x)``.

    ``d`` is ``damping`` capped by :func:`safe_damping`. If the residual
    ``||x - logit(x)||_inf`` grows tenfold past the best value seen, the
    iteration restarts from the best iterate with half the damping. Stops
    once the residual drops below ``tol``; the default start is uniform.
    """
    if not 0.0 < damping <= 1.0:
        raise ParameterError(f"damping must lie in (0, 1], got {damping}")
    T = check_exploration(exploration, game.n_agents)
    x = uniform_strategy(game) if x0 is None else check_joint_strategy(np.array(x0, dtype=float), game.offsets)
    if np.any(x <= 0):
        raise DomainError("qre_fixed_point needs an interior starting point")
    d = safe_damping(game, T, damping)
    L = logit_response(game, x, T)
    res = float(np.max(np.abs(x - L)))
    best_x, best_res = x, res
    it = 0
    while res >= tol and it < max_iter:
        it += 1
        x = (1.0 - d) * x + d * L
        L = logit_response(game, x, T)
        res = float(np.max(np.abs(x - L)))
        if res < best_res:
            best_x, best_res = x, res
        elif res > 10.0 * best_res:
            d *= 0.5
            logger.debug("residual blew up at iteration %d; damping -> %g", it, d)
            x = best_x
            L = logit_response(game, x, T)
            res = best_res
    return QREResult(best_x.copy(), best_res, it, bool(best_res < tol))


def regularized_payoff(game: PolymatrixGame, exploration, x) -> np.ndarray:
    """Entropy-regularised payoff of every agent: u_k(x) - T_k <x_k, ln x_k>."""
    T = check_exploration(exploration, game.n_agents)
    x = np.asarray(x, dtype=float)
    return _block_sum(x * game.rewards(x) - T[game.agent_index] * x * np.log(x), game)


def pseudo_gradient(game: PolymatrixGame, exploration, x) -> np.ndarray:
    """``F(x) = (-D_{x_k} u^H_k(x))_k`` for the regularised game."""
    T = check_exploration(exploration, game.n_agents)
    x = np.asarray(x, dtype=float)
    return -(game.rewards(x) - T[game.agent_index] * (np.log(x) + 1.0))


def _check_interior(game, x):
    x = check_joint_strategy(np.asarray(x, dtype=float), game.offsets)
    if np.any(x <= DOMAIN_FLOOR):
        raise DomainError("pseudo-Jacobian is only defined in the simplex interior")
    return x


def pseudo_jacobian(game: PolymatrixGame, exploration, x) -> np.ndarray:
    """``J(x) = D(x) + N``: entropy Hessian blocks plus constant -A[k, l] blocks."""
    T = check_exploration(exploration, game.n_agents)
    x = _check_interior(game, x)
    J = -np.array(game.payoff_matrix)
    J[np.diag_indices_from(J)] += T[game.agent_index] / x
    return J


@dataclass(frozen=True)
class MonotonicityCertificate:
    min_eig: float
    bound: float
    point: np.ndarray

    @property
    def holds(self) -> bool:
        return self.min_eig >= self.bound - 1e-8

    def to_dict(self) -> dict:
        return {"min_eig": self.min_eig, "bound": self.bound, "point": self.point.tolist()}


def monotonicity_margin(game: PolymatrixGame, exploration, x, *, delta=None,
                        rho=None) -> MonotonicityCertificate:
    """Smallest eigenvalue of sym(J(x)) against ``min_k T_k - delta_I * rho(G)``."""
    J = pseudo_jacobian(game, exploration, x)
    T = check_exploration(exploration, game.n_agents)
    min_eig = float(np.linalg.eigvalsh(0.5 * (J + J.T))[0])
    delta = delta_identical_interests(game) if delta is None else delta
    rho = spectral_radius(game.graph) if rho is None else rho
    return MonotonicityCertificate(min_eig, float(T.min() - delta * rho), np.asarray(x, dtype=float).copy())


def theoretical_threshold(payoffs, network, epsilon: float = 0.05, *, literal: bool = False) -> float:
    """Exploration rate above which a unique, globally stable QRE is guaranteed.

    ``payoffs`` is an ``(A, B)`` pair, a game, or a precomputed delta_I;
    ``network`` is ``ERParams``, ``SBParams`` or a concrete graph. Random
    models use the high-probability spectral bound at confidence
    ``epsilon``. ``literal=True`` returns the bound without the delta_I
    factor.
    """
    if isinstance(payoffs, PolymatrixGame):
        delta = delta_identical_interests(payoffs)
    elif np.ndim(payoffs) == 0:
        delta = float(payoffs)
    else:
        A, B = payoffs
        delta = bimatrix_delta(A, B)
    if isinstance(network, ERParams):
        rho = er_bound(network.n, network.p, epsilon).value
    elif isinstance(network, SBParams):
        rho = sb_bound(network, epsilon, allow_unequal=True).value
    elif isinstance(network, AdjacencyMatrix):
        rho = spectral_radius(network)
    else:
        raise ParameterError(f"unsupported network specification {network!r}")
    return rho if literal else delta * rho


class QRESolver(BaseEstimator):
    """Logit QRE by damped fixed-point iteration.

    ``fit(game)`` sets ``strategy_``, ``residual_``, ``n_iter_`` and
    ``converged_``.
    """

    def __init__(self, exploration=1.0, damping=0.5, tol=1e-10, max_iter=10_000):
        self.exploration = exploration
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, game: PolymatrixGame, y=None, x0=None):
        res = qre_fixed_point(game, self.exploration, x0, self.damping, self.tol, self.max_iter)
        self.result_ = res
        self.strategy_ = res.strategy
        self.residual_ = res.residual
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        return self

    def transform(self, game: PolymatrixGame) -> np.ndarray:
        check_is_fitted(self, "strategy_")
        return self.strategy_
