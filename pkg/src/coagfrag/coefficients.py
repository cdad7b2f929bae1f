"""Power-law coagulation and fragmentation coefficients.

Coagulation kernel ``K(x, y) = K0 (x^alpha y^beta + x^beta y^alpha)``,
fragmentation rate ``a(x) = a0 x^gamma`` and self-similar daughter
distribution ``b(x, y) = B(x/y) / y``, together with their size-capped and
regularised versions used by the time-marching solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError

# exponents closer than this are treated as equal when picking a branch
EXPONENT_TIE = 1e-12


@dataclass(frozen=True)
class CoagulationParams:
    alpha: float
    beta: float
    K0: float = 1.0

    def __post_init__(self):
        if not self.K0 > 0:
            raise DomainError(f"K0 must be positive, got {self.K0}")
        if not (0 <= self.alpha <= self.beta <= 1):
            raise DomainError(
                f"need 0 <= alpha <= beta <= 1, got alpha={self.alpha}, beta={self.beta}"
            )
        if not (0 <= self.lam < 1):
            raise DomainError(f"alpha+beta must lie in [0,1), got {self.lam}")

    @property
    def lam(self) -> float:
        return self.alpha + self.beta


@dataclass(frozen=True, eq=False)
class DaughterSpec:
    """Daughter distribution ``B`` on ``(0, 1)``.

    Use the constructors :meth:`power_law`, :meth:`parabolic` and
    :meth:`tabulated` rather than building instances directly.
    """

    kind: str
    nu: float = 0.0
    p0: float = 2.0
    z: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def power_law(cls, nu: float = 0.0, p0: float | None = None) -> "DaughterSpec":
        if not nu > -1:
            raise DomainError(f"power-law daughter distribution needs nu > -1, got {nu}")
        limit = math.inf if nu >= 0 else 1.0 / abs(nu)
        return cls("power", float(nu), _check_p0(p0, limit))

    @classmethod
    def parabolic(cls, nu: float = 1.0, p0: float | None = None) -> "DaughterSpec":
        if not nu > 0:
            raise DomainError(f"parabolic daughter distribution needs nu > 0, got {nu}")
        limit = math.inf if nu >= 1 else 1.0 / (1.0 - nu)
        return cls("parabolic", float(nu), _check_p0(p0, limit))

    @classmethod
    def tabulated(cls, z, values, p0: float = 2.0, normalize: bool = False) -> "DaughterSpec":
        """Table of ``B`` values at increasing nodes ``z`` in ``(0, 1]``.

        Values are interpolated linearly against ``log z``; below the first
        node the table is continued by the power law fitted to its smallest
        decade, above the last node it is held constant.
        """
        z = np.array(z, dtype=float)
        values = np.array(values, dtype=float)
        if z.ndim != 1 or z.shape != values.shape or z.size < 3:
            raise DomainError("tabulated B needs matching 1-d arrays with at least 3 nodes")
        if np.any(z <= 0) or np.any(z > 1) or np.any(np.diff(z) <= 0):
            raise DomainError("tabulated z nodes must increase strictly within (0, 1]")
        if np.any(values < 0):
            raise DomainError("tabulated B values must be nonnegative")
        if not p0 > 1:
            raise DomainError(f"p0 must exceed 1, got {p0}")
        spec = cls("tabulated", 0.0, float(p0), z, values)
        total = _tabulated_moment(spec, 1.0)
        if normalize:
            spec = cls("tabulated", 0.0, float(p0), z, values / total)
        elif abs(total - 1.0) > 1e-8:
            raise DomainError(f"tabulated B must satisfy int z B(z) dz = 1, got {float(total):.10g}")
        return spec

    @property
    def is_analytic(self) -> bool:
        return self.kind in ("power", "parabolic")


def _check_p0(p0, limit):
    if p0 is None:
        return 2.0 if limit > 2.0 else 0.5 * (1.0 + limit)
    if not (1 < p0 < limit):
        raise DomainError(f"p0 must lie in (1, {limit}) for this distribution, got {p0}")
    return float(p0)


@dataclass(frozen=True)
class FragmentationParams:
    gamma: float
    a0: float = 1.0
    daughter: DaughterSpec = field(default_factory=DaughterSpec.power_law)

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not self.a0 > 0:
            raise DomainError(f"a0 must be positive, got {self.a0}")


@dataclass(frozen=True)
class Truncation:
    """Size cap ``j`` (``inf`` for none) and regularisation ``epsilon``."""

    j: float = math.inf
    epsilon: float = 0.0

    def __post_init__(self):
        if not (0 <= self.epsilon < 1):
            raise DomainError(f"epsilon must lie in [0,1), got {self.epsilon}")
        if not (self.j == math.inf or self.j >= 2):
            raise DomainError(f"size cap j must be >= 2 or inf, got {self.j}")


NO_TRUNCATION = Truncation()


def _positive(*xs):
    for x in xs:
        if np.any(np.asarray(x) <= 0):
            raise DomainError("sizes must be positive")


def eval_K(p: CoagulationParams, x, y):
    _positive(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = p.K0 * (x**p.alpha * y**p.beta + x**p.beta * y**p.alpha)
    return out if out.ndim else float(out)


def eval_K_trunc(p: CoagulationParams, t: Truncation, x, y):
    _positive(x, y)
    xc = np.minimum(x, t.j)
    yc = np.minimum(y, t.j)
    return 2.0 * t.epsilon * p.K0 + eval_K(p, xc, yc)


def eval_a_trunc(f: FragmentationParams, t: Truncation, x):
    _positive(x)
    xc = np.minimum(np.asarray(x, dtype=float), t.j)
    out = f.a0 * (xc**f.gamma + t.epsilon**2)
    return out if out.ndim else float(out)


def eval_B(d: DaughterSpec, z):
    z = np.asarray(z, dtype=float)
    if np.any((z <= 0) | (z >= 1)):
        raise DomainError("daughter distribution is defined on (0, 1)")
    return _B_unchecked(d, z)


def _B_unchecked(d: DaughterSpec, z):
    z = np.asarray(z, dtype=float)
    if d.kind == "power":
        out = (d.nu + 2.0) * z**d.nu
    elif d.kind == "parabolic":
        out = (d.nu + 2.0) * (d.nu + 1.0) * z ** (d.nu - 1.0) * (1.0 - z)
    else:
        out = _tabulated_eval(d, z)
    return out if out.ndim else float(out)


class TailFit(NamedTuple):
    slope: float
    stderr: float


def _tabulated_tail(d: DaughterSpec) -> TailFit:
    """Least-squares slope of ``log B`` against ``log z`` over the smallest decade."""
    mask = d.z <= 10.0 * d.z[0]
    if mask.sum() < 2:
        mask[:2] = True
    pos = mask & (d.values > 0)
    if pos.sum() < 2:
        return TailFit(math.inf, math.inf)
    lz, lb = np.log(d.z[pos]), np.log(d.values[pos])
    if pos.sum() == 2:
        return TailFit(float((lb[1] - lb[0]) / (lz[1] - lz[0])), math.inf)
    r = stats.linregress(lz, lb)
    return TailFit(float(r.slope), float(r.stderr))


def _tabulated_eval(d: DaughterSpec, z):
    lz = np.log(z)
    out = np.interp(lz, np.log(d.z), d.values)
    below = z < d.z[0]
    if np.any(below):
        slope = _tabulated_tail(d).slope
        out = np.where(below, d.values[0] * (z / d.z[0]) ** slope, out)
    return out


def _tabulated_moment(d: DaughterSpec, m: float) -> float:
    slope = _tabulated_tail(d).slope
    z0 = d.z[0]
    if d.values[0] == 0:
        head = 0.0
    elif m + slope + 1 <= 0:
        raise DomainError(f"z^{m} B(z) is not integrable near 0")
    else:
        head = d.values[0] * z0 ** (m + 1) / (m + slope + 1)
    # integrate in log z between table nodes, B is linear there
    lz = np.log(np.append(d.z, 1.0) if d.z[-1] < 1 else d.z)
    body = 0.0
    for lo, hi in zip(lz[:-1], lz[1:]):
        val, _ = integrate.quad(
            lambda u: math.exp((m + 1) * u) * float(_tabulated_eval(d, np.exp(u))),
            lo, hi, epsabs=0.0, epsrel=1e-12, limit=200,
        )
        body += val
    return head + body


class MStar(NamedTuple):
    value: float
    stderr: float
    exact: bool


def estimate_m_star(d: DaughterSpec) -> MStar:
    if d.kind == "power":
        return MStar(-(d.nu + 1.0), 0.0, True)
    if d.kind == "parabolic":
        return MStar(-d.nu, 0.0, True)
    if d.values[0] == 0 and np.all(d.values[d.z <= 10 * d.z[0]] == 0):
        return MStar(-math.inf, 0.0, False)
    fit = _tabulated_tail(d)
    return MStar(-(fit.slope + 1.0), fit.stderr, False)


# below this log-size the integrands are negligible and exp() would over/underflow
LOG_FLOOR = -700.0


def m_star(d: DaughterSpec) -> float:
    """Infimum of the exponents ``m`` for which ``z^m B(z)`` is integrable on (0,1)."""
    return estimate_m_star(d).value


def frak_b(d: DaughterSpec, m: float) -> float:
    """Moment ``int_0^1 z^m B(z) dz``; equals 1 at ``m = 1``."""
    ms = m_star(d)
    if not m > ms:
        raise DomainError(f"moment of order {m} of B diverges (m_star = {ms})")
    nu = d.nu
    if d.kind == "power":
        return (nu + 2.0) / (m + nu + 1.0)
    if d.kind == "parabolic":
        return (nu + 2.0) * (nu + 1.0) / ((m + nu) * (m + nu + 1.0))
    return _tabulated_moment(d, m)


def frak_b_quadrature(d: DaughterSpec, m: float) -> float:
    """Same moment as :func:`frak_b` by adaptive quadrature on ``B`` directly."""
    # substitute z = e^u so algebraic singularities at 0 become exponential tails
    # keep both factors inside double range; the dropped tail is O(exp((m - m_star) u))
    floor = LOG_FLOOR / max(1.0, abs(m + 1.0), abs(m_star(d) + 1.0))

    def integrand(u):
        if u < floor:
            return 0.0
        return math.exp((m + 1.0) * u) * float(_B_unchecked(d, math.exp(u)))

    cuts = [-np.inf, 0.0]
    if d.kind == "tabulated":
        # B has kinks at the nodes
        cuts = [-np.inf, *np.log(d.z[d.z < 1]).tolist(), 0.0]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500)
        total += val
    return total


def frak_Bp(d: DaughterSpec, p: float) -> float:
    """``(int_0^1 B(z)^p dz)^(1/p)`` for ``1 <= p <= p0``."""
    if not (1 <= p <= d.p0):
        raise DomainError(f"p must lie in [1, p0={d.p0}], got {p}")
    nu = d.nu
    if d.kind == "power":
        if not p * nu > -1:
            raise DomainError(f"B^p is not integrable for p={p}")
        return ((nu + 2.0) ** p / (p * nu + 1.0)) ** (1.0 / p)
    if d.kind == "parabolic":
        if not p * (nu - 1.0) > -1:
            raise DomainError(f"B^p is not integrable for p={p}")
        c = ((nu + 2.0) * (nu + 1.0)) ** p
        return (c * special.beta(p * (nu - 1.0) + 1.0, p + 1.0)) ** (1.0 / p)
    slope = _tabulated_tail(d).slope
    if d.values[0] > 0 and not p * slope > -1:
        raise DomainError(f"B^p is not integrable for p={p}")
    val, _ = integrate.quad(
        lambda u: math.exp(u) * float(_tabulated_eval(d, np.exp(u))) ** p,
        -np.inf, 0.0, epsabs=0.0, epsrel=1e-11, limit=500,
    )
    return val ** (1.0 / p)


def predicted_tau(c: CoagulationParams, f: FragmentationParams) -> float | None:
    """Small-size exponent ``tau`` in ``phi(x) ~ A x^-tau`` from formal asymptotics.

    Returns ``None`` when ``gamma == alpha == beta`` and ``B`` is not a power
    law: no formula is available for that branch.
    """
    a, b, g = c.alpha, c.beta, f.gamma
    if g > a + EXPONENT_TIE:
        return a + 1.0 + m_star(f.daughter)
    if g < a - EXPONENT_TIE:
        return c.lam + 1.0 - g
    if b > a + EXPONENT_TIE:
        return a + 1.0
    if f.daughter.kind == "power":
        return a + 2.0 / (f.daughter.nu + 3.0)
    return None


def kernel_bound(p: CoagulationParams, x, y):
    """Upper bound ``K0 (x^lam + y^lam)`` on the kernel, from Young's inequality."""
    return p.K0 * (np.asarray(x, dtype=float) ** p.lam + np.asarray(y, dtype=float) ** p.lam)
