"""Solution CSV and JSON report serialisation."""

from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .coefficients import predicted_tau
from .config import RunConfig
from .errors import DimensionMismatch, DomainError
from .evolve import SteadyReport
from .operators import DistributionState
from .sizegrid import SizeGrid
from .verify import fit_small_size_exponent, moment, weak_form_residual, weighted_Lp

SCHEMA = "coagfrag.report/1"
CSV_HEADER = "x,f,cumulative_mass"


def _fmt(v: float) -> str:
    return repr(float(v))


def solution_csv(state: DistributionState) -> str:
    g = state.grid
    cum = np.cumsum(g.pivots * state.f * g.widths)
    lines = [CSV_HEADER]
    lines += [f"{_fmt(x)},{_fmt(f)},{_fmt(c)}" for x, f, c in zip(g.pivots, state.f, cum)]
    return "\n".join(lines) + "\n"


def write_text(path: str, text: str) -> None:
    """Write UTF-8 text with LF newlines; ``-`` means standard output."""
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_solution_csv(path: str | Path, grid: SizeGrid) -> DistributionState:
    text = Path(path).read_text(encoding="utf-8")
    rows = text.strip().splitlines()
    if not rows or rows[0].strip() != CSV_HEADER:
        raise DimensionMismatch(f"{path}: expected header {CSV_HEADER!r}")
    data = np.loadtxt(io.StringIO("\n".join(rows[1:])), delimiter=",", ndmin=2)
    if data.shape[0] != grid.n_cells:
        raise DimensionMismatch(
            f"{path}: {data.shape[0]} rows but the configured grid has {grid.n_cells} cells"
        )
    if not np.allclose(data[:, 0], grid.pivots, rtol=1e-12, atol=0):
        raise DimensionMismatch(f"{path}: sizes do not match the configured grid pivots")
    return DistributionState(grid, data[:, 1])


def json_safe(obj):
    """Make a payload JSON-safe: infinities become strings, tuples lists."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def stage_dict(r: SteadyReport) -> dict:
    return {
        "epsilon": r.epsilon,
        "j": r.j,
        "converged": r.converged,
        "residual": r.residual,
        "steps": r.steps,
        "time": r.time,
        "mass_error": r.mass_error,
        "overflow_flux": r.overflow_flux,
        "max_overflow_flux": r.max_overflow_flux,
        "max_step_drift": r.max_step_drift,
        "reprojections": r.reprojections,
        "moments": {repr(m): v for m, v in r.moments.items()},
        "weighted_lp": {f"{m!r},{p!r}": v for (m, p), v in r.weighted_lp.items()},
        "boundedness": r.boundedness(),
    }


def verification_summary(cfg: RunConfig, state: DistributionState) -> dict:
    """Weak-form residuals, moments and exponent fit of a state; shared by solve and verify."""
    weak = weak_form_residual(state, cfg.coagulation, cfg.fragmentation,
                              cfg.verify.test_functions)
    tau = predicted_tau(cfg.coagulation, cfg.fragmentation)
    try:
        fit = fit_small_size_exponent(state, cfg.verify.exponent_decades)
        fit_d = {
            "tau_hat": fit.tau_hat,
            "window": list(fit.window),
            "goodness": fit.goodness,
            "cells": fit.cells,
        }
    except DomainError as exc:
        fit_d = {"error": str(exc)}
    return {
        "mass": state.mass,
        "moments": {repr(m): moment(state, m) for m in cfg.verify.moments},
        "weighted_lp": {f"{m!r},{p!r}": weighted_Lp(state, m, p) for m, p in cfg.verify.lp},
        "weak_form": [
            {"test_function": e.label, "lhs": e.lhs, "rhs": e.rhs, "residual": e.residual}
            for e in weak.entries
        ],
        "weak_form_max_residual": weak.max_residual,
        "exponent_fit": fit_d,
        "predicted_tau": "unsupported" if tau is None else tau,
    }


def build_report(
    cfg: RunConfig,
    state: DistributionState,
    reports: list[SteadyReport],
    wall_clock: float | None = None,
) -> dict:
    report = {
        "schema": SCHEMA,
        "converged": all(r.converged for r in reports),
        "config": cfg.to_dict(),
        "stages": [stage_dict(r) for r in reports],
        "final": verification_summary(cfg, state),
    }
    if wall_clock is not None:
        report["wall_clock_seconds"] = wall_clock
    return json_safe(report)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"
