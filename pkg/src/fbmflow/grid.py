"""Uniform time grids on [0, T] shared by samplers, operators and integrators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["GridError", "TimeGrid"]


class GridError(ValueError):
    """Invalid grid construction or window selection."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, horizon] into ``steps`` cells (steps + 1 nodes)."""

    horizon: float
    steps: int

    def __post_init__(self) -> None:
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 2):
            raise GridError(f"steps must be an integer >= 2, got {self.steps!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise GridError(f"horizon must be a finite positive real, got {self.horizon!r}")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def step(self) -> float:
        """Cell width T / N."""
        return self.horizon / self.steps

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node vector (steps + 1,), t_k = k T / N.  Cached; treat as read-only."""
        t = np.linspace(0.0, self.horizon, self.steps + 1)
        t.setflags(write=False)
        return t

    def refined(self, factor: int) -> "TimeGrid":
        """Grid over the same horizon with ``factor``-fold more cells."""
        if not (isinstance(factor, (int, np.integer)) and factor >= 1):
            raise GridError(f"refinement factor must be an integer >= 1, got {factor!r}")
        return TimeGrid(self.horizon, self.steps * int(factor))

    def window_slice(self, start: float, stop: float) -> slice:
        """Index slice of nodes lying inside [start, stop] (with roundoff padding)."""
        if not (start < stop):
            raise GridError(f"empty window [{start}, {stop}]")
        pad = 1e-12 * max(1.0, self.horizon)
        nodes = self.nodes
        lo = int(np.searchsorted(nodes, start - pad, side="left"))
        hi = int(np.searchsorted(nodes, stop + pad, side="right"))
        if hi - lo < 2:
            raise GridError(f"window [{start}, {stop}] contains fewer than two grid nodes")
        return slice(lo, hi)
