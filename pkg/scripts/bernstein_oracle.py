"""Bernstein-equation oracle against its separable closed form.

The ODE ``dU/dlog s = (U - U^2) / (1 + 2U)`` integrates to
``s = C U / (1 - U)^3``; unit slope at the origin fixes ``C = 1``.  The
script prints the numerical solution next to the inverse of that formula
and shows how slowly ``U`` approaches its limit 1 (``1 - U ~ s^(-1/3)``).
"""

from __future__ import annotations

import argparse

import numpy as np
from scipy import optimize

from coagfrag.verify import solve_bernstein


def exact_U(s: float) -> float:
    return optimize.brentq(lambda u: u / (1 - u) ** 3 - s, 0.0, 1 - 1e-15, xtol=1e-16)


def main():
    ap = argparse.ArgumentParser(description="Bernstein oracle study")
    ap.add_argument("--s-max", type=float, default=1e4)
    ap.add_argument("--n-points", type=int, default=400)
    args = ap.parse_args()

    sol = solve_bernstein(args.s_max, args.n_points)
    print(f"max integral-form residual {sol.max_residual:.2e}, U'(0) = {sol.slope_at_zero:.9f}")
    print(f"{'s':>10}{'U (ode)':>16}{'U (exact)':>16}{'1-U':>11}{'s^(1/3)(1-U)':>14}")
    for s in np.logspace(-2, np.log10(args.s_max), 7):
        i = int(np.argmin(np.abs(np.log(sol.s / s))))
        ue = exact_U(sol.s[i])
        print(f"{sol.s[i]:>10.3g}{sol.U[i]:>16.12f}{ue:>16.12f}{1 - ue:>11.3e}"
              f"{sol.s[i] ** (1 / 3) * (1 - ue):>14.6f}")
    for s in (1e4, 1e6, 1e8, 1e10):
        print(f"U({s:.0e}) = {exact_U(s):.6f}")


if __name__ == "__main__":
    main()
