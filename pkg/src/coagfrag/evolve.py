"""Time marching to steady state and continuation in the regularisation.

Two positivity-preserving first-order steppers are provided:

``"patankar"``
    ``f+ = (f + dt * gain(f)) / (1 + dt * loss(f))``, loss treated implicitly
    cell by cell.  Cheap but mass drifts at O(dt^2) per step.
``"mpe"``
    Modified Patankar-Euler on the mass flows between cells: a linear solve
    per step, unconditionally positive and conservative to round-off.  Its
    fixed points are the zeros of the semi-discrete right-hand side.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import (
    CoagulationParams,
    FragmentationParams,
    Truncation,
    frak_b,
    m_star,
)
from .errors import DomainError
from .operators import (
    CoagTables,
    DistributionState,
    FragTables,
    apply_rhs,
    assemble_coagulation,
    assemble_fragmentation,
    coagulation_gain,
    coagulation_loss_coefficients,
    fragmentation_flow_matrix,
    fragmentation_gain,
    mass_flow_matrix,
)
from .sizegrid import SizeGrid

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.1, 0.03, 0.01, 0.003, 0.001)
HISTORY_LENGTH = 256
STEADY_STREAK = 10
REPROJECT_EVERY = 1000


@dataclass(frozen=True)
class EvolveConfig:
    dt_init: float = 1e-3
    dt_max: float = 1e4
    growth: float = 1.5
    tol_steady: float = 1e-8
    max_steps: int = 20000
    mass_tol: float = 1e-10
    scheme: str = "mpe"
    log_every: int = 500

    def __post_init__(self):
        for name in ("dt_init", "dt_max", "growth", "tol_steady", "max_steps", "mass_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not self.tol_steady < 1:
            raise DomainError("tol_steady must be < 1")
        if not self.growth > 1:
            raise DomainError("growth factor must exceed 1")
        if self.scheme not in ("mpe", "patankar"):
            raise DomainError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class Stage:
    epsilon: float
    j: float = math.inf
    overrides: dict = field(default_factory=dict)

    @property
    def truncation(self) -> Truncation:
        return Truncation(self.j, self.epsilon)


@dataclass(frozen=True)
class ContinuationSchedule:
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if not self.stages:
            raise DomainError("continuation schedule needs at least one stage")
        eps = [s.epsilon for s in self.stages]
        js = [s.j for s in self.stages]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("epsilon must decrease strictly across stages")
        if any(b < a for a, b in zip(js, js[1:])):
            raise DomainError("size cap j must not decrease across stages")

    @classmethod
    def default(cls, j: float = math.inf) -> "ContinuationSchedule":
        return cls(tuple(Stage(e, j) for e in DEFAULT_EPSILONS))


@dataclass
class MonitorRecord:
    step: int
    time: float
    dt: float
    residual: float
    mass_error: float
    M2: float
    M2g: float


@dataclass
class SteadyReport:
    converged: bool
    residual: float
    steps: int
    time: float
    mass_error: float
    overflow_flux: float
    reprojections: int
    max_step_drift: float
    max_overflow_flux: float = 0.0
    epsilon: float = 0.0
    j: float = math.inf
    moments: dict = field(default_factory=dict)
    weighted_lp: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def boundedness(self) -> dict:
        """Final value and time-median of M2 and M_{2+gamma} along the run."""
        out = {}
        for key in ("M2", "M2g"):
            vals = np.array([getattr(h, key) for h in self.history])
            if vals.size == 0:
                continue
            out[key] = {
                "max": float(vals.max()),
                "median": float(np.median(vals)),
                "final": float(vals[-1]),
            }
        return out


def default_initial(grid: SizeGrid, rho: float) -> DistributionState:
    """Exponential profile ``exp(-x/rho)/rho`` rescaled to discrete mass ``rho``."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    f = np.exp(-grid.pivots / rho) / rho
    state = DistributionState(grid, f)
    state.f *= rho / state.mass
    return state


def _moment(grid, f, m):
    return float(np.sum(grid.pivots**m * f * grid.widths))


def steady_residual(
    coag: CoagTables, frag: FragTables, s: DistributionState, rate: np.ndarray | None = None
) -> float:
    """Discrete X1 norm of the right-hand side over the size of its two halves."""
    if rate is None:
        rate, _ = apply_rhs(coag, frag, s)
    g = s.grid
    x, w, f = g.pivots, g.widths, s.f
    c, fp = coag.params, frag.params
    scale = fp.a0 * np.sum(x ** (1 + fp.gamma) * f * w) + c.K0 * np.sum(
        x ** ((1 + c.lam) / 2) * f * w
    ) ** 2
    num = np.sum(x * np.abs(rate) * w)
    if scale == 0:
        return 0.0 if num == 0 else math.inf
    return float(num / scale)


def step(
    coag: CoagTables,
    frag: FragTables,
    s: DistributionState,
    dt: float,
    scheme: str = "mpe",
    _frag_flow: np.ndarray | None = None,
) -> DistributionState:
    if not dt > 0:
        raise DomainError("dt must be positive")
    g = s.grid
    f = s.f
    if scheme == "patankar":
        gain = coagulation_gain(coag, f)[0] + fragmentation_gain(frag, f)
        loss = coagulation_loss_coefficients(coag, f) + frag.rate
        fn = (f + dt * gain) / (1.0 + dt * loss)
    elif scheme == "mpe":
        C, sink = mass_flow_matrix(coag, frag, f, _frag_flow)
        np.fill_diagonal(C, 0.0)
        out = C.sum(axis=0) + sink
        A = -dt * C
        A[np.diag_indices_from(A)] += 1.0 + dt * out
        m = g.pivots * f * g.widths
        mn = np.linalg.solve(A, m)
        # A is an M-matrix so mn >= 0 in exact arithmetic; clip round-off
        fn = np.maximum(mn, 0.0) / (g.pivots * g.widths)
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    return DistributionState(g, fn, s.time + dt)


def run_to_steady(
    coag: CoagTables,
    frag: FragTables,
    s0: DistributionState,
    cfg: EvolveConfig = EvolveConfig(),
    moments=(),
    lp_pairs=(),
) -> tuple[DistributionState, SteadyReport]:
    """March until the normalised residual stays below ``tol_steady``.

    The step size grows by ``cfg.growth`` after a step that reduced the
    residual and halves otherwise.  Discrete mass is re-projected onto its
    initial value (multiplicatively) when it drifts beyond ``mass_tol``, at
    most once every 1000 steps.
    """
    rho = s0.mass
    g = s0.grid
    state = s0.copy()
    frag_flow = fragmentation_flow_matrix(frag) if cfg.scheme == "mpe" else None
    rate, diag = apply_rhs(coag, frag, state)
    res = steady_residual(coag, frag, state, rate)
    dt = cfg.dt_init
    streak = 0
    reprojections = 0
    last_reprojection = -REPROJECT_EVERY
    max_drift = 0.0
    max_flux = diag.overflow_flux
    gamma = frag.params.gamma
    history: deque = deque(maxlen=HISTORY_LENGTH)
    converged = False
    n = 0
    while n < cfg.max_steps and not converged:
        m_before = state.mass
        new = step(coag, frag, state, dt, cfg.scheme, frag_flow)
        n += 1
        new_rate, diag = apply_rhs(coag, frag, new)
        new_res = steady_residual(coag, frag, new, new_rate)
        if m_before > 0:
            # drift beyond what the overflow flux explains
            drift = abs(new.mass - m_before + dt * diag.overflow_flux) / m_before / dt
            max_drift = max(max_drift, drift)
        max_flux = max(max_flux, diag.overflow_flux)
        if new_res < res:
            dt = min(dt * cfg.growth, cfg.dt_max)
        else:
            dt = max(dt * 0.5, cfg.dt_init * 1e-3)
        state, rate, res = new, new_rate, new_res
        mass_err = abs(state.mass - rho) / rho if rho > 0 else 0.0
        if mass_err > cfg.mass_tol and n - last_reprojection >= REPROJECT_EVERY:
            state.f *= rho / state.mass
            reprojections += 1
            last_reprojection = n
            rate, diag = apply_rhs(coag, frag, state)
            res = steady_residual(coag, frag, state, rate)
        streak = streak + 1 if res <= cfg.tol_steady else 0
        converged = streak >= STEADY_STREAK
        history.append(
            MonitorRecord(
                n, state.time, dt, res, mass_err,
                _moment(g, state.f, 2.0), _moment(g, state.f, 2.0 + gamma),
            )
        )
        if cfg.log_every and n % cfg.log_every == 0:
            log.info("step %d  t=%.4g  dt=%.3g  residual=%.3e  mass_err=%.2e",
                     n, state.time, dt, res, mass_err)
    _, diag = apply_rhs(coag, frag, state)
    report = SteadyReport(
        converged=converged,
        residual=res,
        steps=n,
        time=state.time,
        mass_error=abs(state.mass - rho) / rho if rho > 0 else 0.0,
        overflow_flux=diag.overflow_flux,
        reprojections=reprojections,
        max_step_drift=max_drift,
        max_overflow_flux=max_flux,
        epsilon=coag.trunc.epsilon,
        j=coag.trunc.j,
        moments={float(m): _moment(g, state.f, m) for m in moments},
        weighted_lp={
            (float(m), float(p)): float(np.sum(g.pivots**m * state.f**p * g.widths))
            for m, p in lp_pairs
        },
        history=list(history),
    )
    log.info("stage eps=%g finished: converged=%s steps=%d residual=%.3e",
             coag.trunc.epsilon, converged, n, res)
    return state, report


def continuation_run(
    grid: SizeGrid,
    c: CoagulationParams,
    f: FragmentationParams,
    schedule: ContinuationSchedule,
    rho: float,
    cfg: EvolveConfig = EvolveConfig(),
    moments=(),
    lp_pairs=(),
    initial: DistributionState | None = None,
) -> tuple[DistributionState, list[SteadyReport]]:
    """Solve stage by stage, each warm-started from the previous steady state."""
    state = initial.copy() if initial is not None else default_initial(grid, rho)
    reports = []
    for stage in schedule.stages:
        t = stage.truncation
        coag = assemble_coagulation(grid, c, t)
        frag = assemble_fragmentation(grid, f, t)
        stage_cfg = replace(cfg, **stage.overrides) if stage.overrides else cfg
        state, rep = run_to_steady(coag, frag, state, stage_cfg, moments, lp_pairs)
        state.time = 0.0
        reports.append(rep)
    return state, reports


def epsilon_threshold(
    m0: float, sigma: float, c: CoagulationParams, f: FragmentationParams, rho: float
) -> float:
    """Regularisation level below which negative moments of order ``m0`` stay controlled."""
    ms = m_star(f.daughter)
    if not (ms < m0 < 0):
        raise DomainError(f"m0 must lie in (m_star={ms}, 0), got {m0}")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return min(1.0, c.K0 * rho**2 / (4.0 * f.a0 * frak_b(f.daughter, m0))) / sigma
