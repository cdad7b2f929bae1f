"""Command line entry point: ``coagfrag solve | verify | oracle``.

Exit codes: 0 success/converged, 1 operational error, 2 solver did not
converge (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Optional, Sequence

from .config import ConfigError, ConfigParseError, RunConfig, load_config
from .errors import ConfigurationError, DimensionMismatch, DomainError
from .evolve import continuation_run
from .io import (
    json_safe,
    build_report,
    dumps_report,
    read_solution_csv,
    solution_csv,
    verification_summary,
    write_text,
)
from .sizegrid import build_geometric_grid
from .verify import constant_kernel_reference, solve_bernstein

log = logging.getLogger("coagfrag")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def cmd_solve(cfg: RunConfig, csv_path=None, json_path=None, wall_clock=False) -> int:
    csv_path = csv_path or cfg.csv_path
    json_path = json_path or cfg.json_path
    t0 = time.perf_counter()
    state, reports = continuation_run(
        cfg.grid.build(), cfg.coagulation, cfg.fragmentation, cfg.schedule, cfg.rho,
        cfg.evolve, moments=cfg.verify.moments, lp_pairs=cfg.verify.lp,
    )
    elapsed = time.perf_counter() - t0
    report = build_report(cfg, state, reports, elapsed if wall_clock else None)
    log.info("solve finished in %.2fs, converged=%s", elapsed, report["converged"])
    try:
        if csv_path:
            write_text(csv_path, solution_csv(state))
        if json_path:
            write_text(json_path, dumps_report(report))
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_ERROR
    return EXIT_OK if report["converged"] else EXIT_NOT_CONVERGED


def cmd_verify(cfg: RunConfig, solution: str, json_path: str | None = None) -> int:
    state = read_solution_csv(solution, cfg.grid.build())
    payload = json_safe({"schema": "coagfrag.verify/1", "final": verification_summary(cfg, state)})
    write_text(json_path or "-", dumps_report(payload))
    return EXIT_OK


def cmd_oracle(name: str, args: argparse.Namespace) -> int:
    if name == "bernstein":
        sol = solve_bernstein(args.s_max, args.n_points)
        lines = ["s,U,residual"]
        lines += [f"{s!r},{u!r},{r!r}" for s, u, r in
                  zip(sol.s.tolist(), sol.U.tolist(), sol.residual.tolist())]
        summary = {
            "oracle": "bernstein",
            "max_residual": sol.max_residual,
            "slope_at_zero": sol.slope_at_zero,
            "U_at_s_max": sol.limit,
        }
    elif name == "constant-kernel":
        z, phi = constant_kernel_reference(args.rho, args.A0)
        grid = build_geometric_grid(args.x_min, args.x_max, args.n_cells)
        lines = ["x,phi_ref"]
        lines += [f"{x!r},{p!r}" for x, p in zip(grid.pivots.tolist(), phi(grid.pivots).tolist())]
        summary = {"oracle": "constant-kernel", "z": z, "rho": args.rho, "A0": args.A0}
    else:
        raise ValueError(name)
    try:
        write_text(args.out, "\n".join(lines) + "\n")
        if args.summary:
            write_text(args.summary, json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_ERROR
    if not args.summary:
        print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coagfrag",
        description="Stationary solutions of coagulation-fragmentation equations",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="continuation run to a stationary state")
    s.add_argument("config")
    s.add_argument("--csv", help="solution CSV path (overrides outputs.csv; '-' for stdout)")
    s.add_argument("--json", help="report JSON path (overrides outputs.json)")
    s.add_argument("--wall-clock", action="store_true",
                   help="add elapsed seconds to the report (breaks byte-identical reruns)")

    v = sub.add_parser("verify", help="recompute checks on an existing solution CSV")
    v.add_argument("solution")
    v.add_argument("config")
    v.add_argument("--json", help="output path, default stdout")

    o = sub.add_parser("oracle", help="closed-form and ODE reference solutions")
    o.add_argument("name", choices=("bernstein", "constant-kernel"))
    o.add_argument("--out", default="-", help="CSV output path, default stdout")
    o.add_argument("--summary", help="JSON summary path (default: one line on stderr)")
    o.add_argument("--s-max", type=float, default=1e4)
    o.add_argument("--n-points", type=int, default=400)
    o.add_argument("--rho", type=float, default=1.0)
    o.add_argument("--A0", type=float, default=1.0)
    o.add_argument("--x-min", type=float, default=1e-6)
    o.add_argument("--x-max", type=float, default=1e3)
    o.add_argument("--n-cells", type=int, default=180)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    # the solver logs progress at INFO
    logging.getLogger("coagfrag").setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "oracle":
            return cmd_oracle(args.name, args)
        cfg = load_config(args.config)
        if args.command == "solve":
            return cmd_solve(cfg, args.csv, args.json, args.wall_clock)
        return cmd_verify(cfg, args.solution, args.json)
    except (ConfigError, ConfigParseError, ConfigurationError, DimensionMismatch,
            DomainError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
