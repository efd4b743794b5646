"""Game families, network specifications and JSON config handling."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ._validation import ParameterError
from .game import (
    PolymatrixGame,
    assign_bimatrix,
    bimatrix_delta,
    make_conflict,
    make_sato,
    make_shapley,
    make_zero_sum,
)
from .graph import (
    AdjacencyMatrix,
    ERParams,
    SBParams,
    complete_graph,
    empty_graph,
    from_edges,
    path_graph,
    read_dense_csv,
    read_edge_list,
    sample_er,
    sample_sb,
)

__all__ = [
    "ConfigError",
    "GameFamily",
    "derive_seed",
    "build_graph",
    "load_config",
    "merge_overrides",
    "DEFAULT_CONFIG",
]


class ConfigError(ParameterError):
    """Invalid or unreadable configuration; the message names the field."""


FAMILIES = ("shapley", "sato", "zerosum", "conflict", "custom")


@dataclass(frozen=True)
class GameFamily:
    """A recipe turning a graph and a random generator into a game."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ConfigError(f"game.family must be one of {FAMILIES}, got {self.name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "GameFamily":
        d = dict(d)
        name = d.pop("family", None)
        if name is None:
            raise ConfigError("game.family is required")
        fam = cls(str(name).lower(), d)
        try:
            fam.bimatrix()
        except (TypeError, ValueError) as err:
            raise ConfigError(f"game: {err}") from err
        return fam

    def to_dict(self) -> dict:
        return {"family": self.name, **self.params}

    def bimatrix(self):
        """``(A, B)`` for families with one game on every edge, else None."""
        p = self.params
        if self.name == "shapley":
            return make_shapley(float(p.get("beta", 0.2)))
        if self.name == "sato":
            return make_sato(float(p.get("eps_x", 0.5)), float(p.get("eps_y", -0.3)))
        if self.name == "zerosum":
            return make_zero_sum()
        if self.name == "custom":
            if "A" not in p or "B" not in p:
                raise ConfigError("game.A and game.B are required for the custom family")
            return np.asarray(p["A"], dtype=float), np.asarray(p["B"], dtype=float)
        return None

    @property
    def delta(self) -> float | None:
        pair = self.bimatrix()
        return None if pair is None else bimatrix_delta(*pair)

    def build(self, graph: AdjacencyMatrix, rng) -> PolymatrixGame:
        meta = {"family": self.name, "params": self.params}
        if self.name == "conflict":
            game = make_conflict(graph, int(self.params.get("actions", 3)), rng)
            game.metadata.update(meta)
            return game
        A, B = self.bimatrix()
        return assign_bimatrix(graph, A, B, rng, metadata=meta)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Hash a base seed and cell/run indices into an independent 64-bit seed."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in indices))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def network_params(model: str, n: int, p: float, q: float | None = None,
                   community_size: int = 5):
    model = model.upper()
    if model == "ER":
        return ERParams(int(n), float(p))
    if model == "SB":
        if q is None:
            raise ConfigError("network.q is required for the SB model")
        if n % community_size:
            raise ConfigError(f"N={n} is not a multiple of network.community_size={community_size}")
        return SBParams.equal(int(n), int(n) // community_size, float(p), float(q))
    raise ConfigError(f"network.model must be ER or SB, got {model!r}")


def sample_network(params, rng) -> AdjacencyMatrix:
    return sample_er(params, rng) if isinstance(params, ERParams) else sample_sb(params, rng)


def build_graph(spec: dict, rng=None) -> AdjacencyMatrix:
    """Concrete graph from a ``network`` config section."""
    model = str(spec.get("model", "")).lower()
    try:
        if model == "er":
            return sample_er(ERParams(int(spec["n"]), float(spec["p"])), rng)
        if model == "sb":
            sizes = spec.get("community_sizes")
            if sizes is None:
                n, size = int(spec["n"]), int(spec.get("community_size", 5))
                sizes = [size] * (n // size)
            pw = spec["p_within"]
            pw = [float(pw)] * len(sizes) if np.ndim(pw) == 0 else pw
            return sample_sb(SBParams(tuple(sizes), tuple(pw), float(spec["q"])), rng)
        if model == "complete":
            return complete_graph(int(spec["n"]))
        if model == "path":
            return path_graph(int(spec["n"]))
        if model == "empty":
            return empty_graph(int(spec["n"]))
        if model == "edges":
            return from_edges(int(spec["n"]), spec["edges"])
        if model == "file":
            path = Path(spec["path"])
            return read_dense_csv(path) if path.suffix == ".csv" else read_edge_list(path)
    except KeyError as err:
        raise ConfigError(f"network.{err.args[0]} is required for model {model!r}") from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f"network: {err}") from err
    raise ConfigError(f"unknown network.model {spec.get('model')!r}")


DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "game": {"family": "sato"},
    "network": {"model": "complete", "n": 3},
    "dynamics": {
        "mode": "discrete",
        "exploration": 1.0,
        "learning_rate": 0.1,
        "steps": 4000,
        "tail": 300,
        "dt": 0.01,
        "var_threshold": 1e-2,
        "rel_threshold": 1e-5,
    },
    "experiment": {},
    "output": {"dir": None, "render": False},
}


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path) -> dict:
    """Read a JSON config (or a run manifest) and merge it over the defaults."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "manifest_version" in data:
        data = data["config"]
    unknown = set(data) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return _deep_merge(DEFAULT_CONFIG, data)


def merge_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as JSON when possible."""
    config = copy.deepcopy(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} does not address a config section")
        node[parts[-1]] = value
    return config
