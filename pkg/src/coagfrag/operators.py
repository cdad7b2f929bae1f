"""Sectional coagulation and fragmentation operators on a geometric grid.

Coagulation uses the fixed-pivot technique: the product of a merger of the
pivots ``x_i`` and ``x_j`` is split between the two pivots bracketing
``x_i + x_j`` so that both number and mass are preserved.  Mergers beyond the
last pivot leave the grid and are accounted for as an overflow mass flux.

Fragmentation distributes daughters of a parent at pivot ``x_k`` onto the
cells below it; each column of the redistribution matrix is rescaled so that
breakup conserves mass exactly on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    CoagulationParams,
    FragmentationParams,
    Truncation,
    _B_unchecked,
    eval_a_trunc,
    eval_K_trunc,
)
from .errors import ConfigurationError, DimensionMismatch
from .sizegrid import SizeGrid

GAUSS_POINTS = 32
# relative slack when deciding whether a merged size still lands on the last pivot
OVERFLOW_SLACK = 1e-12


@dataclass
class DistributionState:
    """Cell-averaged number densities ``f_i`` (per unit size) at time ``time``."""

    grid: SizeGrid
    f: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.grid.n_cells,):
            raise DimensionMismatch(
                f"expected {self.grid.n_cells} densities, got shape {self.f.shape}"
            )

    @property
    def mass(self) -> float:
        g = self.grid
        return float(np.sum(g.pivots * self.f * g.widths))

    def copy(self) -> "DistributionState":
        return DistributionState(self.grid, self.f.copy(), self.time)


@dataclass(frozen=True, eq=False)
class CoagTables:
    """Pair tables for ``i <= j``; arrays are indexed by pair number."""

    grid: SizeGrid
    params: CoagulationParams
    trunc: Truncation
    ii: np.ndarray
    jj: np.ndarray
    kernel: np.ndarray
    sym: np.ndarray
    k_lo: np.ndarray
    k_hi: np.ndarray
    w_lo: np.ndarray
    w_hi: np.ndarray
    overflow: np.ndarray
    pair_size: np.ndarray
    kernel_matrix: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class FragTables:
    grid: SizeGrid
    params: FragmentationParams
    trunc: Truncation
    rate: np.ndarray
    G: np.ndarray = field(repr=False)
    defect: np.ndarray
    raw_number: np.ndarray


@dataclass(frozen=True)
class RhsDiagnostics:
    overflow_flux: float
    mass_rate: float


def _check_state(grid: SizeGrid, s: DistributionState):
    if not grid.same_as(s.grid) or s.f.shape != (grid.n_cells,):
        raise DimensionMismatch("state and tables live on different grids")


def assemble_coagulation(grid: SizeGrid, c: CoagulationParams, t: Truncation) -> CoagTables:
    n = grid.n_cells
    x = grid.pivots
    ii, jj = np.triu_indices(n)
    kmat = eval_K_trunc(c, t, x[:, None], x[None, :])
    kernel = kmat[ii, jj]
    sym = np.where(ii == jj, 0.5, 1.0)
    s = x[ii] + x[jj]

    overflow = s > x[-1] * (1.0 + OVERFLOW_SLACK)
    k_lo = np.searchsorted(x, s, side="right") - 1
    k_lo = np.clip(k_lo, 0, n - 1)
    k_hi = np.minimum(k_lo + 1, n - 1)
    at_top = k_lo == n - 1
    x_lo, x_hi = x[k_lo], x[k_hi]
    w_lo = np.where(at_top, 1.0, (x_hi - s) / np.where(at_top, 1.0, x_hi - x_lo))
    w_hi = 1.0 - w_lo
    w_lo = np.where(overflow, 0.0, w_lo)
    w_hi = np.where(overflow, 0.0, w_hi)
    return CoagTables(
        grid, c, t, ii, jj, kernel, sym, k_lo, k_hi, w_lo, w_hi, overflow, s, kmat
    )


def _pair_rates(tables: CoagTables, f: np.ndarray) -> np.ndarray:
    fw = f * tables.grid.widths
    return tables.sym * tables.kernel * fw[tables.ii] * fw[tables.jj]


def coagulation_loss_coefficients(tables: CoagTables, f: np.ndarray) -> np.ndarray:
    """Per-cell loss rate ``sum_j K_ij f_j w_j`` so that the loss term is ``L_i f_i``."""
    return tables.kernel_matrix @ (f * tables.grid.widths)


def coagulation_gain(tables: CoagTables, f: np.ndarray) -> tuple[np.ndarray, float]:
    n = tables.grid.n_cells
    rates = _pair_rates(tables, f)
    gain = np.bincount(tables.k_lo, rates * tables.w_lo, minlength=n)
    gain += np.bincount(tables.k_hi, rates * tables.w_hi, minlength=n)
    flux = float(np.sum(rates[tables.overflow] * tables.pair_size[tables.overflow]))
    return gain / tables.grid.widths, flux


def apply_coagulation(tables: CoagTables, s: DistributionState) -> tuple[np.ndarray, float]:
    """Coagulation rate of change per cell and the mass flux leaving through ``x_max``."""
    _check_state(tables.grid, s)
    gain, flux = coagulation_gain(tables, s.f)
    loss = coagulation_loss_coefficients(tables, s.f) * s.f
    return gain - loss, flux


def _gauss_log_nodes(lo: np.ndarray, hi: np.ndarray, npts: int = GAUSS_POINTS):
    """Gauss-Legendre nodes/weights for ``int_lo^hi g(x) dx`` taken in ``u = log x``."""
    t, w = np.polynomial.legendre.leggauss(npts)
    ulo, uhi = np.log(lo), np.log(hi)
    half = 0.5 * (uhi - ulo)
    u = 0.5 * (uhi + ulo)[..., None] + half[..., None] * t
    xs = np.exp(u)
    # dx = x du
    ws = half[..., None] * w * xs
    return xs, ws


def assemble_fragmentation(
    grid: SizeGrid,
    f: FragmentationParams,
    t: Truncation,
    max_defect: float = 0.2,
    guard_factor: float = 10.0,
) -> FragTables:
    """Loss rates and mass-exact redistribution matrix for breakup.

    ``G[i, k]`` is the number density produced in cell ``i`` per breakup
    event of a parent at pivot ``x_k``.  Before rescaling, ``defect[k]`` is
    the fraction of the parent's mass not captured on the grid (mostly
    daughters smaller than ``x_min``).  Parents within ``guard_factor`` of
    ``x_min`` are exempt from the ``max_defect`` check: their daughters
    necessarily fall below the grid.
    """
    n = grid.n_cells
    x, e, w = grid.pivots, grid.edges, grid.widths
    G = np.zeros((n, n))
    for k in range(n):
        lo = e[: k + 1]
        hi = np.minimum(e[1 : k + 2], x[k])
        xs, ws = _gauss_log_nodes(lo, hi)
        dens = _B_unchecked(f.daughter, xs / x[k]) / x[k]
        G[: k + 1, k] = np.sum(dens * ws, axis=1) / w[: k + 1]
    raw_number = np.sum(G * w[:, None], axis=0)
    captured = (x * w) @ G / x
    defect = 1.0 - captured
    G = G / captured[None, :]

    checked = x >= guard_factor * grid.x_min
    if np.any(checked) and np.max(np.abs(defect[checked])) > max_defect:
        k = int(np.flatnonzero(checked)[np.argmax(np.abs(defect[checked]))])
        raise ConfigurationError(
            f"fragmentation mass defect {defect[k]:.3g} at parent size {x[k]:.3g} exceeds "
            f"{max_defect}: the grid does not resolve the daughter distribution "
            "(x_min too large or cells too coarse)"
        )
    rate = np.asarray(eval_a_trunc(f, t, x), dtype=float)
    return FragTables(grid, f, t, rate, G, defect, raw_number)


def fragmentation_gain(tables: FragTables, f: np.ndarray) -> np.ndarray:
    return tables.G @ (tables.rate * f * tables.grid.widths)


def apply_fragmentation(tables: FragTables, s: DistributionState) -> np.ndarray:
    _check_state(tables.grid, s)
    return fragmentation_gain(tables, s.f) - tables.rate * s.f


def apply_rhs(
    coag: CoagTables, frag: FragTables, s: DistributionState
) -> tuple[np.ndarray, RhsDiagnostics]:
    if not coag.grid.same_as(frag.grid):
        raise DimensionMismatch("coagulation and fragmentation tables use different grids")
    rc, flux = apply_coagulation(coag, s)
    rate = rc + apply_fragmentation(frag, s)
    g = s.grid
    mass_rate = float(np.sum(g.pivots * rate * g.widths))
    return rate, RhsDiagnostics(flux, mass_rate)


def mass_flow_matrix(
    coag: CoagTables, frag: FragTables, f: np.ndarray, frag_flow: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Linear mass-flow coefficients frozen at ``f``.

    Returns ``(C, sink)`` with the mass flow from cell ``k`` to cell ``i``
    equal to ``C[i, k] * m_k`` (``m_k = x_k f_k w_k``) and the flow out of
    the grid equal to ``sink[k] * m_k``.
    """
    g = coag.grid
    n = g.n_cells
    x, w = g.pivots, g.widths
    fw = f * w
    ii, jj, ov = coag.ii, coag.jj, coag.overflow
    coef_i = coag.sym * coag.kernel * fw[jj]
    coef_j = coag.sym * coag.kernel * fw[ii]
    s = np.where(ov, 1.0, coag.pair_size)
    frac_lo = coag.w_lo * x[coag.k_lo] / s
    frac_hi = coag.w_hi * x[coag.k_hi] / s
    dest = np.concatenate([coag.k_lo, coag.k_hi, coag.k_lo, coag.k_hi])
    src = np.concatenate([ii, ii, jj, jj])
    vals = np.concatenate([coef_i * frac_lo, coef_i * frac_hi, coef_j * frac_lo, coef_j * frac_hi])
    C = np.bincount(dest * n + src, vals, minlength=n * n).reshape(n, n)
    sink = np.bincount(ii[ov], coef_i[ov], minlength=n) + np.bincount(
        jj[ov], coef_j[ov], minlength=n
    )
    if frag_flow is None:
        frag_flow = fragmentation_flow_matrix(frag)
    return C + frag_flow, sink


def fragmentation_flow_matrix(frag: FragTables) -> np.ndarray:
    g = frag.grid
    return (g.pivots * g.widths)[:, None] * frag.G * (frag.rate / g.pivots)[None, :]
