"""Run configuration: a TOML document, nested sections as dotted keys.

Minimal example::

    rho = 1.0
    grid.x_min = 1e-6
    grid.x_max = 1e3
    grid.n_cells = 180
    coagulation.alpha = 0.0
    coagulation.beta = 0.0
    fragmentation.gamma = 1.0

Every other key has a default; see ``README.md`` for the full schema.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coefficients import CoagulationParams, DaughterSpec, FragmentationParams
from .errors import DomainError
from .evolve import DEFAULT_EPSILONS, ContinuationSchedule, EvolveConfig, Stage
from .sizegrid import SizeGrid, build_geometric_grid
from .verify import DEFAULT_EXP_RATES, TestFunction


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ConfigParseError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    x_min: float
    x_max: float
    n_cells: int

    def build(self) -> SizeGrid:
        return build_geometric_grid(self.x_min, self.x_max, self.n_cells)


@dataclass(frozen=True)
class VerifyConfig:
    test_functions: tuple[TestFunction, ...] = tuple(
        TestFunction.exponential(s) for s in DEFAULT_EXP_RATES
    )
    exponent_decades: float = 2.0
    moments: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)
    lp: tuple[tuple[float, float], ...] = ((0.0, 2.0),)


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    coagulation: CoagulationParams
    fragmentation: FragmentationParams
    rho: float
    schedule: ContinuationSchedule
    evolve: EvolveConfig = EvolveConfig()
    csv_path: str | None = None
    json_path: str | None = None
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    base_dir: Path = Path(".")

    def to_dict(self) -> dict:
        """Fully resolved configuration with defaults, for echoing into reports."""
        d = self.fragmentation.daughter
        daughter: dict[str, Any] = {"kind": d.kind, "p0": d.p0}
        if d.kind == "tabulated":
            daughter["z"] = d.z.tolist()
            daughter["values"] = d.values.tolist()
        else:
            daughter["nu"] = d.nu
        return {
            "rho": self.rho,
            "grid": {
                "x_min": self.grid.x_min,
                "x_max": self.grid.x_max,
                "n_cells": self.grid.n_cells,
            },
            "coagulation": {
                "K0": self.coagulation.K0,
                "alpha": self.coagulation.alpha,
                "beta": self.coagulation.beta,
            },
            "fragmentation": {
                "a0": self.fragmentation.a0,
                "gamma": self.fragmentation.gamma,
                "daughter": daughter,
            },
            "schedule": [
                {"epsilon": s.epsilon, "j": _num(s.j), **s.overrides}
                for s in self.schedule.stages
            ],
            "evolve": {f.name: getattr(self.evolve, f.name) for f in fields(EvolveConfig)},
            "verify": {
                "test_functions": [
                    {"kind": t.kind, "s": t.s, "R": t.R, "m": t.m}
                    for t in self.verify.test_functions
                ],
                "exponent_decades": self.verify.exponent_decades,
                "moments": list(self.verify.moments),
                "lp": [list(p) for p in self.verify.lp],
            },
        }


def _num(v):
    return "inf" if v == math.inf else v


_EVOLVE_KEYS = {f.name for f in fields(EvolveConfig)}
_TOP_KEYS = {"rho", "grid", "coagulation", "fragmentation", "schedule", "evolve",
             "outputs", "verify"}


def _take(section: dict, key: str, path: str, kind=float, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    v = section[key]
    label = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(v, str) and v.lower() in ("inf", "infinity"):
            return math.inf
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(label, f"expected a number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(label, f"expected an integer, got {v!r}")
        return v
    if kind is str:
        if not isinstance(v, str):
            raise ConfigError(label, f"expected a string, got {v!r}")
        return v
    return v


def _no_extra(section: dict, allowed: set, path: str):
    extra = sorted(set(section) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _section(doc: dict, key: str) -> dict:
    v = doc.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(key, "expected a table")
    return v


def _guard(key: str, build):
    try:
        return build()
    except DomainError as exc:
        raise ConfigError(key, str(exc)) from None


def _load_table(path: Path, key: str):
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(key, f"cannot read daughter table: {exc}") from None
    if data.shape[1] != 2:
        raise ConfigError(key, "daughter table must have two columns (z, B)")
    return data[:, 0], data[:, 1]


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"config parse error: {exc}") from None
    base_dir = Path(base_dir)
    _no_extra(doc, _TOP_KEYS, "")

    rho = _take(doc, "rho", "", required=True)
    if not rho > 0:
        raise ConfigError("rho", "must be positive")

    g = _section(doc, "grid")
    _no_extra(g, {"x_min", "x_max", "n_cells"}, "grid")
    grid = GridConfig(
        _take(g, "x_min", "grid", required=True),
        _take(g, "x_max", "grid", required=True),
        _take(g, "n_cells", "grid", kind=int, required=True),
    )
    _guard("grid", grid.build)

    c = _section(doc, "coagulation")
    _no_extra(c, {"K0", "alpha", "beta"}, "coagulation")
    alpha = _take(c, "alpha", "coagulation", required=True)
    beta = _take(c, "beta", "coagulation", required=True)
    K0 = _take(c, "K0", "coagulation", default=1.0)
    if not K0 > 0:
        raise ConfigError("coagulation.K0", "must be positive")
    if not (0 <= alpha <= beta <= 1):
        raise ConfigError("coagulation.alpha", "need 0 <= alpha <= beta <= 1")
    if not (0 <= alpha + beta < 1):
        raise ConfigError("coagulation.beta", "alpha+beta must lie in [0,1)")
    coag = _guard("coagulation", lambda: CoagulationParams(alpha, beta, K0))

    fr = _section(doc, "fragmentation")
    _no_extra(fr, {"a0", "gamma", "daughter"}, "fragmentation")
    gamma = _take(fr, "gamma", "fragmentation", required=True)
    a0 = _take(fr, "a0", "fragmentation", default=1.0)
    if not gamma > 0:
        raise ConfigError("fragmentation.gamma", "gamma > 0 required")
    if not a0 > 0:
        raise ConfigError("fragmentation.a0", "a0 > 0 required")
    dsec = fr.get("daughter", {})
    if not isinstance(dsec, dict):
        raise ConfigError("fragmentation.daughter", "expected a table")
    _no_extra(dsec, {"kind", "nu", "p0", "table"}, "fragmentation.daughter")
    kind = _take(dsec, "kind", "fragmentation.daughter", kind=str, default="power")
    p0 = _take(dsec, "p0", "fragmentation.daughter", default=None)
    if kind == "power":
        nu = _take(dsec, "nu", "fragmentation.daughter", default=0.0)
        daughter = _guard("fragmentation.daughter", lambda: DaughterSpec.power_law(nu, p0))
    elif kind == "parabolic":
        nu = _take(dsec, "nu", "fragmentation.daughter", default=1.0)
        daughter = _guard("fragmentation.daughter", lambda: DaughterSpec.parabolic(nu, p0))
    elif kind == "tabulated":
        tpath = _take(dsec, "table", "fragmentation.daughter", kind=str, required=True)
        z, vals = _load_table(base_dir / tpath, "fragmentation.daughter.table")
        daughter = _guard(
            "fragmentation.daughter.table",
            lambda: DaughterSpec.tabulated(z, vals, p0 if p0 is not None else 2.0),
        )
    else:
        raise ConfigError("fragmentation.daughter.kind",
                          "must be one of 'power', 'parabolic', 'tabulated'")
    frag = FragmentationParams(gamma, a0, daughter)

    ev = _section(doc, "evolve")
    _no_extra(ev, _EVOLVE_KEYS, "evolve")
    evolve = _guard("evolve", lambda: EvolveConfig(**ev))

    raw_sched = doc.get("schedule")
    if raw_sched is None:
        stages = tuple(Stage(e) for e in DEFAULT_EPSILONS)
    else:
        if not isinstance(raw_sched, list) or not raw_sched:
            raise ConfigError("schedule", "expected a non-empty array of tables")
        stages = []
        for i, st in enumerate(raw_sched):
            path = f"schedule[{i}]"
            if not isinstance(st, dict):
                raise ConfigError(path, "expected a table")
            _no_extra(st, {"epsilon", "j"} | _EVOLVE_KEYS, path)
            eps = _take(st, "epsilon", path, required=True)
            j = _take(st, "j", path, default=math.inf)
            overrides = {k: v for k, v in st.items() if k in _EVOLVE_KEYS}
            if overrides:
                _guard(path, lambda: EvolveConfig(**{**evolve.__dict__, **overrides}))
            stages.append(_guard(path, lambda: Stage(eps, j, overrides)))
            _guard(path, lambda: stages[-1].truncation)
        stages = tuple(stages)
    schedule = _guard("schedule", lambda: ContinuationSchedule(stages))

    out = _section(doc, "outputs")
    _no_extra(out, {"csv", "json"}, "outputs")
    csv_path = _take(out, "csv", "outputs", kind=str, default=None)
    json_path = _take(out, "json", "outputs", kind=str, default=None)

    vs = _section(doc, "verify")
    _no_extra(vs, {"exp_rates", "test_functions", "exponent_decades", "moments", "lp"}, "verify")
    tfs = [TestFunction.exponential(s) for s in vs.get("exp_rates", DEFAULT_EXP_RATES)] \
        if "test_functions" not in vs else []
    for i, t in enumerate(vs.get("test_functions", [])):
        path = f"verify.test_functions[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(path, "expected a table")
        _no_extra(t, {"kind", "s", "R", "m"}, path)
        tfs.append(_guard(path, lambda: TestFunction(**t)))
    try:
        lp = tuple((float(m), float(p)) for m, p in vs.get("lp", VerifyConfig.lp))
        moments = tuple(float(m) for m in vs.get("moments", VerifyConfig.moments))
    except (TypeError, ValueError):
        raise ConfigError("verify", "moments must be numbers and lp a list of [m, p] pairs")
    if any(p < 1 for _, p in lp):
        raise ConfigError("verify.lp", "p must be >= 1")
    decades = _take(vs, "exponent_decades", "verify", default=2.0)
    if not decades > 0:
        raise ConfigError("verify.exponent_decades", "must be positive")
    verify = VerifyConfig(tuple(tfs), decades, moments, lp)

    return RunConfig(grid, coag, frag, rho, schedule, evolve, csv_path, json_path,
                     verify, base_dir)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
