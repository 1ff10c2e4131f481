"""Constants ledger and quantitative estimates.

From a reference trajectory this module extracts the radii that feed the
Gronwall-type difference bounds, assembles the growth-rate constants, and
inverts the smallness conditions into guaranteed existence times.  It also
provides the closed-form life-span lower bounds for the special data
classes and the log-weighted interpolation inequality that converts
control of a weighted energy into control of intermediate norms.

All time inversions are done in log space, so astronomically slack
exponentials never overflow.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import Trajectory
from .errors import (DriftExceeded, EmptyTrajectory, EpsilonTooLarge, GapTooLarge,
                     InfiniteKb, KirchsimError, LambdaConditionFails, MissingField,
                     ZeroE)
from .model import Nonlinearity, Weight, golden_max
from .spectral import Spectrum


@dataclass(frozen=True)
class ConstantsBundle:
    """Radii and range maxima extracted from a reference solution.

    ``h0``     Hamiltonian of the reference initial state.
    ``r0``     amplitude radius, at least sqrt(2*h0/nu0).
    ``c0``     max of m on [0, r0^2];  ``l0``  max of |m'| there.
    ``r1``     ceiling for max(|A^(1/4) v|, |A^(3/4) u|) on the window.
    ``r2``     ceiling for |A^(5/4) u| (regular case), if available.
    ``r2_lambda``  same for the low-frequency part below ``cutoff``.
    Radii measured from samples carry a 1% inflation so strict
    inequalities stay testable under sampling error.
    """

    h0: float
    nu0: float
    r0: float
    c0: float
    l0: float
    r1: float
    r2: Optional[float] = None
    r2_lambda: Optional[float] = None
    cutoff: Optional[float] = None

    def __post_init__(self):
        if self.r0 < math.sqrt(2.0 * self.h0 / self.nu0) * (1.0 - 1e-12):
            raise ValueError("r0 must be at least sqrt(2*h0/nu0)")
        if self.c0 < self.nu0 * (1.0 - 1e-12):
            raise ValueError("c0 is a max of m, so it cannot be below nu0")


@dataclass(frozen=True)
class GammaSet:
    """Growth-rate constants of the difference bounds.

    The plain pair (gamma1, gamma2) drives the regular-case bound; the
    cutoff-dependent pair (gamma1_lambda, gamma2_lambda) plus the
    cutoff-independent pair (gamma3, gamma4) drive the minimal-regularity
    bound.  Fields are None when the bundle lacks the inputs.
    """

    gamma1: float
    gamma2: Optional[float]
    gamma1_lambda: Optional[float]
    gamma2_lambda: Optional[float]
    gamma3: float
    gamma4: float
    cutoff: Optional[float] = None


def build_constants(spec: Spectrum, nl: Nonlinearity, base_traj: Trajectory,
                    cutoff: Optional[float] = None, inflate: float = 1.01) -> ConstantsBundle:
    """Extract the constants ledger from a reference trajectory.

    r0 is fixed by the equality choice r0 = sqrt(2*h0/nu0); the sampled
    radii r1, r2, r2_lambda are inflated by 1%.
    """
    if len(base_traj) == 0:
        raise EmptyTrajectory("reference trajectory has no samples")
    drift = base_traj.info.ham_drift
    if drift is not None and drift > 1e3 * base_traj.info.tol:
        raise DriftExceeded(f"reference trajectory drift {drift:.3e} untrusted")
    lam = spec.lam
    us, vs = base_traj.us, base_traj.vs
    state0 = base_traj.initial
    sigma0 = float(spec.lam2 @ (state0.u * state0.u))
    h0 = float(state0.v @ state0.v + nl.M(sigma0))
    nu0 = nl.nu0
    r0 = math.sqrt(2.0 * h0 / nu0)
    c0 = nl.range_max_m(r0 * r0)
    l0 = nl.range_max_slope(r0 * r0)
    quarter_v = np.sqrt((vs * vs) @ lam)
    three_quarter_u = np.sqrt((us * us) @ (lam ** 3))
    r1 = inflate * float(np.max(np.maximum(quarter_v, three_quarter_u)))
    r2 = inflate * float(np.sqrt(np.max((us * us) @ (lam ** 5))))
    r2_lambda = None
    if cutoff is not None:
        low = lam <= cutoff
        lam5_low = np.where(low, lam ** 5, 0.0)
        r2_lambda = inflate * float(np.sqrt(np.max((us * us) @ lam5_low)))
    return ConstantsBundle(h0=h0, nu0=nu0, r0=r0, c0=c0, l0=l0, r1=r1,
                           r2=r2, r2_lambda=r2_lambda, cutoff=cutoff)


def gammas(cb: ConstantsBundle, nu0: Optional[float] = None,
           require: Optional[str] = None) -> GammaSet:
    """Evaluate the growth-rate constants from a bundle.

    ``require`` of "regular" or "minimal" raises MissingField when the
    bundle lacks that case's inputs.
    """
    nu0 = cb.nu0 if nu0 is None else nu0
    g1 = max(1.0, cb.c0) / min(1.0, nu0)
    sqrt_nu0 = math.sqrt(nu0)
    g2 = None
    if cb.r2 is not None:
        g2 = 8.0 * cb.l0 * cb.r1 ** 2 / nu0 + 4.0 * cb.l0 * cb.r0 * (cb.r1 + cb.r2) / sqrt_nu0
    g1l = g2l = None
    if cb.cutoff is not None and cb.r2_lambda is not None:
        g1l = g1 * max(1.0, 1.0 / cb.cutoff ** 2)
        g2l = (8.0 * cb.l0 * cb.r1 ** 2 / nu0
               + 2.0 * cb.l0 * (2.0 * cb.r0 + 3.0 * cb.r1) * (2.0 * cb.r1 + cb.r2_lambda) / sqrt_nu0)
    g3 = 2.0 * g1
    g4 = 8.0 * cb.l0 * cb.r1 ** 2 / nu0
    if require == "regular" and g2 is None:
        raise MissingField("regular case needs r2")
    if require == "minimal" and (g1l is None or g2l is None):
        raise MissingField("minimal case needs cutoff and r2_lambda")
    if require not in (None, "regular", "minimal"):
        raise ValueError(f"unknown case {require!r}")
    return GammaSet(gamma1=g1, gamma2=g2, gamma1_lambda=g1l, gamma2_lambda=g2l,
                    gamma3=g3, gamma4=g4, cutoff=cb.cutoff)


def guaranteed_time(gs: GammaSet, e0: float, r1: float, case: str = "regular",
                    e_u_high0: Optional[float] = None) -> float:
    """Largest horizon on which the smallness conditions certifiably hold.

    Regular case: the supremum of T with gamma1 * e0 * exp(gamma2*T) < r1^2,
    in closed form.  Minimal case: the supremum of T with both
    e_u_high0 * gamma3 * exp(gamma4*T) < r1^2/6 and
    e0 * (gamma1_lambda*exp(gamma2_lambda*T) + 2*gamma3*exp(gamma4*T)) < r1^2/2;
    the second is solved by monotone bisection in log space.
    """
    if not e0 > 0.0:
        raise ValueError("e0 must be positive")
    log_r1sq = 2.0 * math.log(r1)
    if case == "regular":
        if gs.gamma2 is None:
            raise MissingField("regular case needs gamma2")
        gap = log_r1sq - math.log(gs.gamma1 * e0)
        if gap <= 0.0:
            raise GapTooLarge("gamma1 * e0 already reaches r1^2 at time zero")
        if gs.gamma2 == 0.0:
            return math.inf
        return gap / gs.gamma2
    if case != "minimal":
        raise ValueError(f"unknown case {case!r}")

    if gs.gamma1_lambda is None or gs.gamma2_lambda is None:
        raise MissingField("minimal case needs gamma1_lambda and gamma2_lambda")
    if e_u_high0 is None:
        raise MissingField("minimal case needs the initial high-frequency energy")

    # cutoff condition: sup T with e_u_high0 * gamma3 * exp(gamma4 T) < r1^2/6
    if e_u_high0 > 0.0:
        gap_l = log_r1sq - math.log(6.0 * gs.gamma3 * e_u_high0)
        if gap_l <= 0.0:
            raise LambdaConditionFails(
                "high-frequency energy reaches r1^2/6 already at time zero")
        t_lambda = math.inf if gs.gamma4 == 0.0 else gap_l / gs.gamma4
    else:
        t_lambda = math.inf

    def lhs_log(t: float) -> float:
        return math.log(e0) + np.logaddexp(
            math.log(gs.gamma1_lambda) + gs.gamma2_lambda * t,
            math.log(2.0 * gs.gamma3) + gs.gamma4 * t)

    target = log_r1sq - math.log(2.0)
    if lhs_log(0.0) >= target:
        raise GapTooLarge("smallness condition already fails at time zero")
    if gs.gamma2_lambda == 0.0 and gs.gamma4 == 0.0:
        return t_lambda
    hi = 1.0
    while lhs_log(hi) < target:
        hi *= 2.0
        if hi > 1e18:
            return t_lambda
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lhs_log(mid) < target:
            lo = mid
        else:
            hi = mid
    return min(0.5 * (lo + hi), t_lambda)


_LEDGER_FORMULAS = (
    ("H0", "h0", "|v(0)|^2 + M(|A^(1/2) u(0)|^2)"),
    ("R0", "r0", "sqrt(2*H0/nu0)"),
    ("C0", "c0", "max m on [0, R0^2]"),
    ("L0", "l0", "max |m'| on [0, R0^2]"),
    ("R1", "r1", "1.01 * max_t max(|A^(1/4) v|, |A^(3/4) u|)"),
    ("R2", "r2", "1.01 * max_t |A^(5/4) u|"),
    ("R2_lambda", "r2_lambda", "1.01 * max_t |A^(5/4) u_low|"),
    ("Gamma1", "gamma1", "max(1, C0) / min(1, nu0)"),
    ("Gamma2", "gamma2", "8*L0*R1^2/nu0 + 4*L0*R0*(R1 + R2)/sqrt(nu0)"),
    ("Gamma1_lambda", "gamma1_lambda", "Gamma1 * max(1, 1/cutoff^2)"),
    ("Gamma2_lambda", "gamma2_lambda",
     "8*L0*R1^2/nu0 + 2*L0*(2*R0 + 3*R1)*(2*R1 + R2_lambda)/sqrt(nu0)"),
    ("Gamma3", "gamma3", "2 * Gamma1"),
    ("Gamma4", "gamma4", "8*L0*R1^2/nu0"),
)


def ledger_rows(cb: ConstantsBundle, gs: Optional[GammaSet] = None) -> list:
    """Name / formula / value rows for the constants table (JSON-ready)."""
    rows = []
    for name, attr, formula in _LEDGER_FORMULAS:
        source = cb if hasattr(cb, attr) else None
        if source is None and gs is not None and hasattr(gs, attr):
            source = gs
        if source is None:
            continue
        value = getattr(source, attr)
        if value is None:
            continue
        rows.append({"name": name, "formula": formula, "value": float(value)})
    return rows


def constants_to_json(cb: ConstantsBundle, gs: Optional[GammaSet] = None) -> str:
    return json.dumps(ledger_rows(cb, gs), sort_keys=True)


_CASE_THRESHOLDS = {
    "finite": 1.0,
    "analytic": math.exp(-1.0),
    "quasi_analytic": math.exp(-math.e),
    "null": 1.0,
}


@dataclass(frozen=True)
class LifespanEstimate:
    """Closed-form life-span lower bound for one perturbation size."""

    case: str
    epsilon: float
    lower_bound: float
    rate_constant: float


def lifespan_lower_bound(case: str, epsilon: float, rate_constant: float,
                         threshold: Optional[float] = None) -> LifespanEstimate:
    """Evaluate the case's closed-form bound.

    finite:          |log eps| / rate
    analytic:        log(|log eps|) / rate
    quasi_analytic:  log(log(|log eps|)) / rate
    null:            rate / eps^2

    The default admissibility thresholds are the positivity thresholds of
    each formula; tighter operational thresholds may be passed in.
    """
    if case not in _CASE_THRESHOLDS:
        raise ValueError(f"unknown case {case!r}")
    limit = _CASE_THRESHOLDS[case] if threshold is None else threshold
    if not 0.0 < epsilon < limit:
        raise EpsilonTooLarge(f"epsilon {epsilon} not in (0, {limit}) for case {case}")
    if not rate_constant > 0.0:
        raise ValueError("rate constant must be positive")
    log_eps = abs(math.log(epsilon))
    if case == "finite":
        value = log_eps / rate_constant
    elif case == "analytic":
        value = math.log(log_eps) / rate_constant
    elif case == "quasi_analytic":
        value = math.log(math.log(log_eps)) / rate_constant
    else:
        value = rate_constant / epsilon ** 2
    return LifespanEstimate(case=case, epsilon=float(epsilon),
                            lower_bound=float(value), rate_constant=float(rate_constant))


def kb_constant(weight: Weight, b: float) -> float:
    """K_b = sup over sigma of sigma**b * exp(-phi(sigma)/2).

    Certified by marching a grid outward until the integrand has been
    decreasing and below 1e-3 of the running max for 100 consecutive
    nodes, then refined by golden section around the best node.  Raises
    InfiniteKb when no such tail shows up before the scan cap.
    """
    if not b > 0.0:
        raise ValueError("b must be positive")
    if weight.family == "zero":
        raise InfiniteKb("sigma**b is unbounded under the zero weight")

    def g(sigma: float) -> float:
        return sigma ** b * math.exp(-0.5 * float(weight(sigma)))

    step = 0.05 * max(1.0, b)
    sigma = 0.0
    best_val, best_sigma = 0.0, 0.0
    prev = 0.0
    quiet = 0
    while quiet < 100:
        sigma += step
        if sigma > 1e9:
            raise InfiniteKb("no certified decreasing tail before the scan cap")
        val = g(sigma)
        if val > best_val:
            best_val, best_sigma = val, sigma
        if val < prev and val < 1e-3 * best_val:
            quiet += 1
        else:
            quiet = 0
        prev = val
    refined = golden_max(g, max(best_sigma - step, 0.0), best_sigma + step)
    return max(best_val, refined)


@dataclass(frozen=True)
class InterpolationResult:
    lhs: float
    bound: float
    k_b: float
    clamped: bool


def interpolate(a, lambdas, b: float, weight: Weight) -> InterpolationResult:
    """Check sum(a_k * lam_k**b) against the weighted interpolation bound.

    The bound is (K_b + phi^-1(2*log(F/E))**b) * E with
    E = sum(a_k) and F = sum(a_k * max(1, lam_k) * exp(phi(lam_k))).
    F >= E holds whenever the weights are the natural ones; for standalone
    inputs with F < E the log is clamped at zero and the result flagged.
    """
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if a.shape != lam.shape or a.ndim != 1:
        raise ValueError("a and lambdas must be 1-d arrays of equal length")
    if np.any(a < 0.0) or np.any(lam < 0.0):
        raise ValueError("sequences must be nonnegative")
    if not b > 0.0:
        raise ValueError("b must be positive")
    e_sum = float(a.sum())
    if e_sum <= 0.0:
        raise ZeroE("interpolation needs a positive total mass")
    f_sum = float(a @ (np.maximum(1.0, lam) * np.exp(weight(lam))))
    k_b = kb_constant(weight, b)
    ratio = f_sum / e_sum
    clamped = ratio < 1.0
    y = 2.0 * math.log(max(ratio, 1.0))
    sigma_star = weight.inverse(y)
    bound = (k_b + sigma_star ** b) * e_sum
    lhs = float(a @ lam ** b)
    if lhs > bound * (1.0 + 1e-9):
        raise KirchsimError(
            f"interpolation inequality violated: lhs={lhs!r} bound={bound!r}")
    return InterpolationResult(lhs=lhs, bound=bound, k_b=k_b, clamped=clamped)
