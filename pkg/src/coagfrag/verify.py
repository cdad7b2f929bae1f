"""Independent checks on computed stationary states.

Nothing here reuses the operator tables for the continuum checks: the weak
form is evaluated with the exact coefficients and exact test-function
increments, the fragmentation weight by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .coefficients import (
    CoagulationParams,
    DaughterSpec,
    FragmentationParams,
    LOG_FLOOR,
    _B_unchecked,
    eval_K,
)
from .errors import DomainError, QuadratureError
from .operators import CoagTables, DistributionState, FragTables

DEFAULT_EXP_RATES = (0.1, 0.3, 1.0, 3.0, 10.0)
BOUNDARY_CELLS = 5


@dataclass(frozen=True)
class TestFunction:
    """Bounded Lipschitz test function vanishing at 0.

    ``exponential``: ``1 - exp(-s x)``; ``capped_linear``: ``min(x, R)``;
    ``power_small``: ``min(x, R)**m`` with ``0 < m <= 1``.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    s: float = 1.0
    R: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "capped_linear", "power_small"):
            raise DomainError(f"unknown test function {self.kind!r}")
        if not (self.s > 0 and self.R > 0):
            raise DomainError("test function parameters must be positive")
        if self.kind == "power_small" and not (0 < self.m <= 1):
            raise DomainError("power_small needs 0 < m <= 1")

    @classmethod
    def exponential(cls, s: float) -> "TestFunction":
        return cls("exponential", s=s)

    @classmethod
    def capped_linear(cls, R: float) -> "TestFunction":
        return cls("capped_linear", R=R)

    @classmethod
    def power_small(cls, m: float, R: float) -> "TestFunction":
        return cls("power_small", R=R, m=m)

    @property
    def label(self) -> str:
        if self.kind == "exponential":
            return f"exp(s={self.s:g})"
        if self.kind == "capped_linear":
            return f"min(x,{self.R:g})"
        return f"min(x,{self.R:g})^{self.m:g}"

    def kink(self) -> float | None:
        return None if self.kind == "exponential" else self.R

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            return -np.expm1(-self.s * x)
        if self.kind == "capped_linear":
            return np.minimum(x, self.R)
        return np.minimum(x, self.R) ** self.m


def default_test_functions(rates: Sequence[float] = DEFAULT_EXP_RATES) -> list[TestFunction]:
    return [TestFunction.exponential(s) for s in rates]


@dataclass(frozen=True)
class WeakFormEntry:
    label: str
    lhs: float
    rhs: float
    residual: float


@dataclass(frozen=True)
class WeakFormReport:
    entries: tuple[WeakFormEntry, ...]

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    def by_label(self) -> dict[str, WeakFormEntry]:
        return {e.label: e for e in self.entries}


@dataclass(frozen=True)
class BernsteinSolution:
    s: np.ndarray
    U: np.ndarray
    residual: np.ndarray
    slope_at_zero: float
    limit: float

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


@dataclass(frozen=True)
class ExponentFit:
    tau_hat: float
    window: tuple[float, float]
    goodness: float
    cells: int
    intercept: float = 0.0


def moment(s: DistributionState, m: float) -> float:
    g = s.grid
    return float(np.sum(g.pivots**m * s.f * g.widths))


def weighted_Lp(s: DistributionState, m: float, p: float) -> float:
    if not p >= 1:
        raise DomainError("p must be >= 1")
    g = s.grid
    return float(np.sum(g.pivots**m * s.f**p * g.widths))


def chi_theta(theta: TestFunction, x, y):
    """``theta(x + y) - theta(x) - theta(y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # grouped so that the result is bitwise symmetric in (x, y)
    return theta(x + y) - (theta(x) + theta(y))


def N_theta(theta: TestFunction, d: DaughterSpec, y: float, rtol: float = 1e-12) -> float:
    """``theta(y) - int_0^1 theta(y z) B(z) dz`` by adaptive quadrature in ``log z``."""
    if not y > 0:
        raise DomainError("size must be positive")

    def integrand(u):
        if u < LOG_FLOOR:
            return 0.0
        z = math.exp(u)
        return float(theta(y * z)) * float(_B_unchecked(d, z)) * z

    pieces = [(-math.inf, 0.0)]
    k = theta.kink()
    if k is not None and k < y:
        split = math.log(k / y)
        pieces = [(-math.inf, split), (split, 0.0)]
    total = 0.0
    for lo, hi in pieces:
        val, err, *rest = integrate.quad(
            integrand, lo, hi, epsabs=0.0, epsrel=rtol, limit=400, full_output=1
        )
        if len(rest) > 1 and rest[0] != 1 and err > 1e-8 * max(abs(val), 1e-300):
            raise QuadratureError(f"N_theta quadrature failed at y={y}: {rest[1]}")
        total += val
    return float(theta(y)) - total


def weak_form_residual(
    s: DistributionState,
    c: CoagulationParams,
    f: FragmentationParams,
    thetas: Sequence[TestFunction],
) -> WeakFormReport:
    """Stationary weak-form balance with untruncated coefficients.

    ``lhs = 1/2 sum_ij K(x_i, x_j) chi(x_i, x_j) f_i f_j w_i w_j`` and
    ``rhs = sum_k a(x_k) N(x_k) f_k w_k``; a stationary state has
    ``lhs == rhs``.
    """
    g = s.grid
    x, w = g.pivots, g.widths
    fw = s.f * w
    K = eval_K(c, x[:, None], x[None, :])
    a = f.a0 * x**f.gamma
    floor = f.a0 * s.mass * 1e-30
    entries = []
    for th in thetas:
        chi = chi_theta(th, x[:, None], x[None, :])
        lhs = 0.5 * float(fw @ (K * chi) @ fw)
        N = np.array([N_theta(th, f.daughter, xk) for xk in x])
        rhs = float(np.sum(a * N * fw))
        res = abs(lhs - rhs) / (abs(lhs) + abs(rhs) + floor) if floor > 0 else 0.0
        entries.append(WeakFormEntry(th.label, lhs, rhs, res))
    return WeakFormReport(tuple(entries))


def discrete_weak_form(
    coag: CoagTables, frag: FragTables, s: DistributionState, theta_values: np.ndarray
) -> tuple[float, float]:
    """Grid analogue of ``d/dt sum theta_i f_i w_i`` split into its two parts.

    The merged-pair increment interpolates ``theta`` linearly between the
    pivots bracketing ``x_i + x_j`` (zero beyond the last pivot); the
    breakup weight uses the assembled redistribution matrix.
    """
    g = s.grid
    x, w = g.pivots, g.widths
    th = np.asarray(theta_values, dtype=float)
    fw = s.f * w
    ssum = x[:, None] + x[None, :]
    merged = np.interp(ssum, x, th)
    merged[ssum > x[-1] * (1 + 1e-12)] = 0.0
    chi = merged - th[:, None] - th[None, :]
    coag_part = 0.5 * float(fw @ (coag.kernel_matrix * chi) @ fw)
    N = th - (th * w) @ frag.G
    frag_part = -float(np.sum(frag.rate * N * fw))
    return coag_part, frag_part


def constant_kernel_reference(rho: float, A0: float) -> tuple[float, Callable]:
    """Stationary profile ``A0 z^x`` of mass ``rho`` for ``K = 2``, ``a = A0 x``, ``B = 2``."""
    if not (rho > 0 and A0 > 0):
        raise DomainError("rho and A0 must be positive")
    log_z = -math.sqrt(A0 / rho)
    z = math.exp(log_z)

    def phi(x):
        return A0 * np.exp(np.asarray(x, dtype=float) * log_z)

    return z, phi


def solve_bernstein(
    s_max: float = 1e4, n_points: int = 400, s0: float = 1e-6, rtol: float = 1e-12
) -> BernsteinSolution:
    """Integrate ``U^2 + U = (2/s) int_0^s U`` with unit slope at the origin.

    Differentiating gives ``U' = (U - U^2) / (s (1 + 2U))``; it is marched in
    ``log s`` together with ``Y = int_0^s U`` so the integral form can be
    checked on the output grid.
    """
    if not s_max >= 1e3:
        raise DomainError("s_max must be at least 1e3")
    if not n_points >= 200:
        raise DomainError("n_points must be at least 200")

    def rhs(t, y):
        U, _ = y
        s = math.exp(t)
        return [(U - U * U) / (1.0 + 2.0 * U), U * s]

    t_eval = np.linspace(math.log(s0), math.log(s_max), n_points)
    sol = integrate.solve_ivp(
        rhs, (t_eval[0], t_eval[-1]), [s0, 0.5 * s0 * s0],
        method="DOP853", t_eval=t_eval, rtol=rtol, atol=1e-14,
    )
    if not sol.success:
        raise QuadratureError(f"Bernstein integration failed: {sol.message}")
    s = np.exp(sol.t)
    U, Y = sol.y
    residual = U * U + U - 2.0 * Y / s
    slope = float(U[0] / s[0])
    return BernsteinSolution(s, U, residual, slope, float(U[-1]))


def bernstein_transform(s: DistributionState, weights: np.ndarray, svals) -> np.ndarray:
    """``sum_i (1 - exp(-s x_i)) weights_i w_i`` for each ``s``."""
    g = s.grid
    sv = np.asarray(svals, dtype=float)
    return -np.expm1(-sv[:, None] * g.pivots[None, :]) @ (weights * g.widths)


def dlp_profile_check(
    s: DistributionState, k0: float, A0: float, lam: float, svals=None
) -> tuple[np.ndarray, np.ndarray]:
    """Residual of the Bernstein equation for the rescaled product-kernel solution.

    ``g(x) = k0 x^(lam/2) f(x) / (2 A0)`` must have a Bernstein transform
    ``W`` solving ``W^2 + W = (2/s) int_0^s W``; the equation is invariant
    under dilations of ``s`` so no scale has to be fitted.  Returns
    ``(svals, residual)``.
    """
    if svals is None:
        svals = np.logspace(-2, 2, 161)
    svals = np.asarray(svals, dtype=float)
    x = s.grid.pivots
    gw = k0 * x ** (lam / 2) * s.f / (2.0 * A0)
    W = bernstein_transform(s, gw, svals)
    # int_0^s (1 - e^{-r x}) dr = s - (1 - e^{-s x}) / x
    sx = svals[:, None] * x[None, :]
    avg = 1.0 + np.expm1(-sx) / sx
    mean_W = avg @ (gw * s.grid.widths)
    return svals, W * W + W - 2.0 * mean_W


def fit_small_size_exponent(
    s: DistributionState, decades: float = 2.0, skip: int = BOUNDARY_CELLS
) -> ExponentFit:
    """Least-squares slope of ``log f`` against ``log x`` near ``x_min``.

    The window starts ``skip`` cells above ``x_min`` and spans ``decades``
    decades; ``tau_hat`` is minus the slope.
    """
    g = s.grid
    x = g.pivots
    if skip >= g.n_cells:
        raise DomainError("window too small")
    lo = x[skip]
    hi = lo * 10.0**decades
    sel = (x >= lo) & (x <= hi * (1 + 1e-12)) & (s.f > 0)
    if sel.sum() < 8:
        raise DomainError(f"exponent window holds {int(sel.sum())} cells, need at least 8")
    r = stats.linregress(np.log(x[sel]), np.log(s.f[sel]))
    return ExponentFit(
        tau_hat=float(-r.slope),
        window=(float(x[sel][0]), float(x[sel][-1])),
        goodness=float(r.rvalue**2),
        cells=int(sel.sum()),
        intercept=float(r.intercept),
    )
