"""Exceptions and input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


class ParameterError(ValueError):
    """A model or algorithm parameter is outside its admissible range."""


class ContractError(ValueError):
    """An input violates a structural precondition (shape, symmetry, ...)."""


class DomainError(ValueError):
    """A point lies outside the domain where a map is defined."""


class NumericalError(ArithmeticError):
    """An iteration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def check_probability(value, name, *, open_interval=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ParameterError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if open_interval and not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")
    if not open_interval and not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive_int(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_exploration(T, n_agents, name="exploration"):
    """Broadcast a scalar or per-agent exploration rate to shape (n_agents,)."""
    arr = np.asarray(T, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_agents, float(arr))
    if arr.shape != (n_agents,):
        raise ParameterError(
            f"{name} must be a scalar or have length {n_agents}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ParameterError(f"{name} must be finite and > 0, got {arr.tolist()}")
    return arr


def check_symmetric_binary(entries):
    G = np.asarray(entries)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ContractError(f"adjacency matrix must be square, got shape {G.shape}")
    if not np.all((G == 0) | (G == 1)):
        raise ContractError("adjacency matrix entries must be 0 or 1")
    if not np.array_equal(G, G.T):
        raise ContractError("adjacency matrix must be symmetric")
    if np.any(np.diag(G) != 0):
        raise ContractError("adjacency matrix must have a zero diagonal")
    return G


def check_joint_strategy(x, offsets, *, atol=1e-10):
    """Validate a flat joint strategy against per-agent block offsets."""
    x = np.asarray(x, dtype=float)
    if x.shape != (offsets[-1],):
        raise ContractError(
            f"joint strategy must have length {offsets[-1]}, got shape {x.shape}"
        )
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ContractError("joint strategy entries must be finite and nonnegative")
    sums = np.add.reduceat(x, offsets[:-1]) if len(offsets) > 1 else np.zeros(0)
    if np.any(np.abs(sums - 1.0) > atol):
        raise ContractError("each agent's strategy must sum to 1")
    return x


def as_generator(seed):
    """Return a numpy Generator for an int, SeedSequence, Generator or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
