"""Channel specification files and the bundled test channels."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .prob import Channel

ROW_TOL = 1e-9
BUNDLED = ("useless_binary", "noiseless_binary", "bsc01_stateless", "stuck_at_memory_beta05")


class SpecError(ValueError):
    """A channel specification failed validation."""


@dataclass(frozen=True)
class ChannelSpec:
    s_size: int
    x_size: int
    y_size: int
    state_dist: np.ndarray
    w: np.ndarray
    name: str = ""

    @property
    def channel(self) -> Channel:
        return Channel(self.w)

    def to_dict(self) -> dict:
        return {"name": self.name, "s_size": self.s_size, "x_size": self.x_size,
                "y_size": self.y_size, "state_dist": self.state_dist.tolist(), "w": self.w.tolist()}


def _size(data: dict, key: str) -> int:
    if key not in data:
        raise SpecError(f"missing field '{key}'")
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SpecError(f"field '{key}' must be a positive integer, got {v!r}")
    return v


def _reals(v, field: str) -> np.ndarray:
    try:
        arr = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"field '{field}' must contain only numbers") from None
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"field '{field}' has non-finite entries")
    return arr


def parse_spec(data: dict) -> ChannelSpec:
    if not isinstance(data, dict):
        raise SpecError("channel spec must be an object")
    s, x, y = (_size(data, k) for k in ("s_size", "x_size", "y_size"))
    for key in ("state_dist", "w"):
        if key not in data:
            raise SpecError(f"missing field '{key}'")
    p = _reals(data["state_dist"], "state_dist")
    if p.shape != (s,):
        raise SpecError(f"field 'state_dist' must have {s} entries, got shape {p.shape}")
    if np.any(p < 0):
        raise SpecError(f"field 'state_dist' entry {int(np.argmax(p < 0))} is negative")
    if abs(p.sum() - 1.0) > ROW_TOL:
        raise SpecError(f"field 'state_dist' sums to {p.sum():.12g}, not 1")
    w = data["w"]
    if not isinstance(w, list) or len(w) != s:
        raise SpecError(f"field 'w' must be a list of {s} state blocks")
    for si, block in enumerate(w):
        if not isinstance(block, list) or len(block) != x:
            raise SpecError(f"field 'w' block w[{si}] must have {x} rows")
        for xi, row in enumerate(block):
            if not isinstance(row, list) or len(row) != y:
                raise SpecError(f"field 'w' row w[{si}][{xi}] must have {y} entries")
    w = _reals(w, "w")
    for si, xi in np.argwhere(np.ones((s, x), bool)):
        row = w[si, xi]
        if np.any(row < 0):
            raise SpecError(f"field 'w' row w[{si}][{xi}] has a negative entry")
        if abs(row.sum() - 1.0) > ROW_TOL:
            raise SpecError(f"field 'w' row w[{si}][{xi}] sums to {row.sum():.12g}, not 1")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise SpecError("field 'name' must be text")
    return ChannelSpec(s, x, y, p, w, name)


def load_spec(path) -> ChannelSpec:
    """Read a JSON channel spec; a bare bundled name is accepted as well."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled(str(path))
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise SpecError(f"{path} is not valid JSON: {e}") from None
    return parse_spec(data)


def bundled(name: str) -> ChannelSpec:
    if name not in BUNDLED:
        raise SpecError(f"unknown bundled channel {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files(__package__).joinpath("data", name + ".json").read_text(encoding="utf-8")
    return parse_spec(json.loads(text))
