"""Nonlinear stiffness law and spectral weight families.

Two model ingredients live here.  The nonlinearity ``m`` multiplies the
operator in the wave equation and must stay above a positive floor
(strict hyperbolicity); its primitive ``M`` enters the conserved
Hamiltonian, and its derivative bound enters every Gronwall constant.
The weight ``phi`` grades mode coordinates by frequency and separates
the Sobolev / analytic / quasi-analytic data classes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import NegativeSigma, WrongFamily, ZeroWeightNotInvertible

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Golden-section maximum of a unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol * max(1.0, abs(a), abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return max(fc, fd)


def grid_golden_max(fn: Callable[[float], float], lo: float, hi: float, n: int = 4096) -> float:
    """Grid scan plus golden-section refinement around the best node.

    Used for range maxima of C1 functions, where the value only enters as
    an upper bound and grid maxima converge.
    """
    if hi <= lo:
        return fn(lo)
    xs = np.linspace(lo, hi, n)
    vals = np.array([fn(x) for x in xs])
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n - 1)]
    return max(float(vals[i]), golden_max(fn, a, b))


@dataclass(frozen=True)
class Nonlinearity:
    """Stiffness coefficient m with primitive M and derivative m'.

    ``family`` is one of "constant", "affine", "custom".  Builtin
    families carry closed-form primitive and derivative; custom ones get
    adaptive quadrature for M and (optionally) central differences for
    the slope.  The floor ``nu0 > 0`` is spot-checked on a grid at
    construction for custom families and enforced algebraically for the
    builtin ones.
    """

    family: str
    nu0: float
    intercept: float = 0.0
    slope_coeff: float = 0.0
    fn: Optional[Callable[[float], float]] = None
    fn_prime: Optional[Callable[[float], float]] = None
    check_range: float = 10.0

    def __post_init__(self):
        if not self.nu0 > 0.0:
            raise ValueError("hyperbolicity floor nu0 must be positive")
        if self.family == "constant":
            if self.intercept < self.nu0:
                raise ValueError("constant value must be >= nu0")
        elif self.family == "affine":
            if self.intercept < self.nu0:
                raise ValueError("affine intercept must be >= nu0")
            if self.slope_coeff < 0.0:
                raise ValueError("affine slope must be >= 0 so the floor holds for all sigma")
        elif self.family == "custom":
            if self.fn is None:
                raise ValueError("custom nonlinearity needs a callable")
            grid = np.linspace(0.0, self.check_range, 257)
            vals = np.array([float(self.fn(s)) for s in grid])
            if np.any(vals < self.nu0 * (1.0 - 1e-12)):
                raise ValueError("custom m dips below nu0 on the checked range")
        else:
            raise ValueError(f"unknown nonlinearity family {self.family!r}")

    @staticmethod
    def constant(nu0: float) -> "Nonlinearity":
        return Nonlinearity(family="constant", nu0=nu0, intercept=nu0)

    @staticmethod
    def affine(nu0: float = 1.0, intercept: Optional[float] = None, slope: float = 1.0) -> "Nonlinearity":
        return Nonlinearity(
            family="affine", nu0=nu0,
            intercept=nu0 if intercept is None else intercept,
            slope_coeff=slope,
        )

    @staticmethod
    def custom(fn, nu0: float, fn_prime=None, check_range: float = 10.0) -> "Nonlinearity":
        return Nonlinearity(family="custom", nu0=nu0, fn=fn, fn_prime=fn_prime,
                            check_range=check_range)

    def _require_nonneg(self, sigma: float) -> float:
        sigma = float(sigma)
        if sigma < 0.0:
            raise NegativeSigma(f"sigma must be >= 0, got {sigma}")
        return sigma

    def m(self, sigma: float) -> float:
        sigma = self._require_nonneg(sigma)
        if self.family == "constant":
            return self.intercept
        if self.family == "affine":
            return self.intercept + self.slope_coeff * sigma
        return float(self.fn(sigma))

    def m_slope(self, sigma: float) -> float:
        sigma = self._require_nonneg(sigma)
        if self.family == "constant":
            return 0.0
        if self.family == "affine":
            return self.slope_coeff
        if self.fn_prime is not None:
            return float(self.fn_prime(sigma))
        h = 1e-6 * max(1.0, sigma)
        lo = max(sigma - h, 0.0)
        return (float(self.fn(sigma + h)) - float(self.fn(lo))) / (sigma + h - lo)

    def M(self, sigma: float) -> float:
        """Primitive of m with M(0) = 0."""
        sigma = self._require_nonneg(sigma)
        if self.family == "constant":
            return self.intercept * sigma
        if self.family == "affine":
            return self.intercept * sigma + 0.5 * self.slope_coeff * sigma * sigma
        if sigma == 0.0:
            return 0.0
        value, _ = quad(self.fn, 0.0, sigma, epsabs=1e-12, epsrel=1e-12, limit=200)
        return float(value)

    def range_max_m(self, hi: float) -> float:
        """max m on [0, hi] (the propagation-speed ceiling for that range)."""
        if self.family == "constant":
            return self.intercept
        if self.family == "affine":
            return self.m(max(hi, 0.0))
        return grid_golden_max(self.m, 0.0, max(hi, 0.0))

    def range_max_slope(self, hi: float) -> float:
        """max |m'| on [0, hi]."""
        if self.family == "constant":
            return 0.0
        if self.family == "affine":
            return abs(self.slope_coeff)
        return grid_golden_max(lambda s: abs(self.m_slope(s)), 0.0, max(hi, 0.0))

    @staticmethod
    def from_config(cfg: dict) -> "Nonlinearity":
        cfg = dict(cfg)
        family = cfg.pop("family", None)
        nu0 = cfg.pop("nu0", None)
        if family is None or nu0 is None:
            raise ValueError("nonlinearity config needs 'family' and 'nu0'")
        if family == "constant":
            value = cfg.pop("value", nu0)
            extra = set(cfg)
            if extra:
                raise ValueError(f"unknown nonlinearity keys: {sorted(extra)}")
            return Nonlinearity(family="constant", nu0=float(nu0), intercept=float(value))
        if family == "affine":
            intercept = cfg.pop("intercept", max(1.0, float(nu0)))
            slope = cfg.pop("slope", 1.0)
            extra = set(cfg)
            if extra:
                raise ValueError(f"unknown nonlinearity keys: {sorted(extra)}")
            return Nonlinearity(family="affine", nu0=float(nu0),
                                intercept=float(intercept), slope_coeff=float(slope))
        raise ValueError(f"nonlinearity family {family!r} not configurable from JSON")


def _qa_phi(sigma):
    sigma = np.asarray(sigma, dtype=float)
    out = sigma / np.log(2.0 + sigma)
    return out


@dataclass(frozen=True)
class Weight:
    """Increasing frequency weight phi with phi(0) = 0.

    Families: "zero" (Sobolev scale), "linear" (phi = r0*sigma, the
    analytic scale), "quasi_analytic" (phi = sigma/log(2+sigma), the
    classical quasi-analytic scale), or a user callable, which must be
    strictly increasing (flat segments are rejected rather than guessed
    around, since the inverse would be ill-defined).
    """

    family: str
    r0: float = 1.0
    fn: Optional[Callable] = None

    def __post_init__(self):
        if self.family == "linear":
            if not self.r0 > 0.0:
                raise ValueError("linear weight needs r0 > 0")
        elif self.family == "custom":
            if self.fn is None:
                raise ValueError("custom weight needs a callable")
            if abs(float(self.fn(0.0))) > 1e-14:
                raise ValueError("weight must vanish at 0")
            grid = np.linspace(0.0, 64.0, 513)
            vals = np.array([float(self.fn(s)) for s in grid])
            if np.any(np.diff(vals) <= 0.0):
                raise ValueError("custom weight must be strictly increasing")
        elif self.family not in ("zero", "quasi_analytic"):
            raise ValueError(f"unknown weight family {self.family!r}")

    @staticmethod
    def zero() -> "Weight":
        return Weight(family="zero")

    @staticmethod
    def linear(r0: float = 1.0) -> "Weight":
        return Weight(family="linear", r0=r0)

    @staticmethod
    def quasi_analytic() -> "Weight":
        return Weight(family="quasi_analytic")

    @staticmethod
    def custom(fn) -> "Weight":
        return Weight(family="custom", fn=fn)

    @property
    def regularity_class(self) -> str:
        """Data class the weight selects, decided per family, never numerically.

        Divergence of the defining improper integral is not falsifiable on a
        finite grid, so the tag is assigned analytically: both the linear and
        the classical quasi-analytic weights diverge; the zero weight is the
        plain Sobolev scale.
        """
        return {
            "zero": "sobolev",
            "linear": "analytic",
            "quasi_analytic": "quasi_analytic",
            "custom": "custom",
        }[self.family]

    def __call__(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if self.family == "zero":
            out = np.zeros_like(sigma)
        elif self.family == "linear":
            out = self.r0 * sigma
        elif self.family == "quasi_analytic":
            out = _qa_phi(sigma)
        else:
            out = np.vectorize(self.fn, otypes=[float])(sigma)
        return out if out.ndim else float(out)

    def inverse(self, y: float, tol: float = 1e-12) -> float:
        """sigma with |phi(sigma) - y| <= tol*max(1, y), by closed form or bisection."""
        if self.family == "zero":
            raise ZeroWeightNotInvertible("the zero weight has no inverse")
        y = float(y)
        if y < 0.0:
            raise ValueError("inverse requested at negative value")
        if y == 0.0:
            return 0.0
        if self.family == "linear":
            return y / self.r0
        target = tol * max(1.0, y)
        hi = 1.0
        while self(hi) < y:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("weight never reaches the requested value")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = self(mid)
            if abs(val - y) <= target:
                return mid
            if val < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    @staticmethod
    def from_config(cfg: dict) -> "Weight":
        cfg = dict(cfg)
        family = cfg.pop("family", None)
        if family == "zero":
            extra = set(cfg)
        elif family == "linear":
            r0 = float(cfg.pop("r0", 1.0))
            extra = set(cfg)
            if not extra:
                return Weight.linear(r0)
        elif family == "quasi_analytic":
            extra = set(cfg)
            if not extra:
                return Weight.quasi_analytic()
        else:
            raise ValueError(f"weight family {family!r} not configurable from JSON")
        if extra:
            raise ValueError(f"unknown weight keys: {sorted(extra)}")
        return Weight.zero()


def inv_phi_majorant_c2(weight: Weight, y_max: float, n: int = 4096) -> float:
    """Smallest grid-certified c2 with phi^-1(y) <= c2 * y * log(2+y) on
    [1e-6, y_max], inflated by 5% as safety margin.

    Only meaningful for the classical quasi-analytic weight, where the
    ratio tends to 1 at both ends and the certified constant stays O(1).
    """
    if weight.family != "quasi_analytic":
        raise WrongFamily("majorant constant defined for the quasi-analytic weight only")
    if not y_max > 0.0:
        raise ValueError("y_max must be positive")
    ys = np.geomspace(1e-6, y_max, n)
    ratios = np.array([weight.inverse(y) / (y * math.log(2.0 + y)) for y in ys])
    return float(1.05 * ratios.max())
