"""Geometric size grids.

Cells are half-open ``[edges[i], edges[i+1])`` and the pivot of each cell is
the geometric mean of its edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

BELOW = -1
ABOVE = -2


@dataclass(frozen=True, eq=False)
class SizeGrid:
    x_min: float
    x_max: float
    n_cells: int
    ratio: float
    edges: np.ndarray = field(repr=False)
    pivots: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.edges, self.pivots, self.widths):
            arr.setflags(write=False)

    @property
    def log_ratio(self) -> float:
        return float(np.log(self.ratio))

    def same_as(self, other: "SizeGrid") -> bool:
        return (
            self.n_cells == other.n_cells
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )


def build_geometric_grid(x_min: float, x_max: float, n_cells: int) -> SizeGrid:
    """Split ``[x_min, x_max)`` into ``n_cells`` cells of constant edge ratio."""
    if not (x_min > 0):
        raise DomainError(f"x_min must be positive, got {x_min}")
    if not (x_max > x_min):
        raise DomainError(f"x_max must exceed x_min, got x_min={x_min}, x_max={x_max}")
    if int(n_cells) != n_cells or n_cells < 2:
        raise DomainError(f"n_cells must be an integer >= 2, got {n_cells}")
    n_cells = int(n_cells)
    log_lo, log_hi = np.log(x_min), np.log(x_max)
    edges = np.exp(np.linspace(log_lo, log_hi, n_cells + 1))
    # pin the ends exactly; exp(log(x)) is not always x
    edges[0], edges[-1] = x_min, x_max
    pivots = np.sqrt(edges[:-1] * edges[1:])
    widths = np.diff(edges)
    ratio = float((x_max / x_min) ** (1.0 / n_cells))
    return SizeGrid(float(x_min), float(x_max), n_cells, ratio, edges, pivots, widths)


def locate_cell(grid: SizeGrid, x: float) -> int:
    """Index ``i`` with ``edges[i] <= x < edges[i+1]``, or ``BELOW`` / ``ABOVE``."""
    if not (x > 0):
        raise DomainError(f"size must be positive, got {x}")
    if x < grid.x_min:
        return BELOW
    if x >= grid.x_max:
        return ABOVE
    i = int(np.searchsorted(grid.edges, x, side="right")) - 1
    return min(i, grid.n_cells - 1)
