"""Small-size exponent of stationary states against the formal prediction.

Sweeps gamma for fixed (alpha, beta) and a power-law daughter distribution,
solving each case by continuation and fitting log f against log x over the
first decades of the grid.

    python3 scripts/exponent_sweep.py --alpha 0.2 --beta 0.5 --gammas 0.1 0.2 0.5 1.0
"""

from __future__ import annotations

import argparse
import math

from coagfrag.coefficients import CoagulationParams, DaughterSpec, FragmentationParams, predicted_tau
from coagfrag.evolve import ContinuationSchedule, Stage, continuation_run
from coagfrag.sizegrid import build_geometric_grid
from coagfrag.verify import fit_small_size_exponent

# eps must fall well below K(x_min, x_min) when coagulation dominates small sizes
DEEP_SCHEDULE = (0.1, 0.03, 0.01, 0.003, 1e-3, 1e-4, 1e-5, 1e-6, 0.0)


def main():
    ap = argparse.ArgumentParser(description="tau_hat versus predicted tau")
    ap.add_argument("--alpha", type=float, default=0.2)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--nu", type=float, default=0.0)
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.1, 0.2, 0.5, 1.0, 1.5])
    ap.add_argument("--x-min", type=float, default=1e-6)
    ap.add_argument("--x-max", type=float, default=1e5)
    ap.add_argument("--n-cells", type=int, default=220)
    ap.add_argument("--decades", type=float, default=2.0)
    args = ap.parse_args()

    grid = build_geometric_grid(args.x_min, args.x_max, args.n_cells)
    c = CoagulationParams(args.alpha, args.beta)
    schedule = ContinuationSchedule(tuple(Stage(e) for e in DEEP_SCHEDULE))
    print(f"alpha={c.alpha} beta={c.beta} nu={args.nu}  grid {grid.x_min:g}..{grid.x_max:g} "
          f"({grid.n_cells} cells)")
    print(f"{'gamma':>7}{'tau_pred':>10}{'tau_hat':>9}{'R^2':>8}{'conv':>6}")
    for g in args.gammas:
        f = FragmentationParams(g, 1.0, DaughterSpec.power_law(args.nu))
        state, reps = continuation_run(grid, c, f, schedule, 1.0)
        fit = fit_small_size_exponent(state, args.decades)
        tau = predicted_tau(c, f)
        tau_s = "n/a" if tau is None else f"{tau:.3f}"
        conv = all(r.converged for r in reps)
        print(f"{g:>7.3f}{tau_s:>10}{fit.tau_hat:>9.3f}{fit.goodness:>8.4f}{str(conv):>6}")
        if not math.isfinite(fit.tau_hat):
            break


if __name__ == "__main__":
    main()
