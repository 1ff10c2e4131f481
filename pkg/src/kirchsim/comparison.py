"""Comparison-ODE machinery for the weighted-energy growth envelopes.

The weighted energy of a global solution obeys a scalar differential
inequality whose right-hand side depends on the weight family:

  analytic scale        y' <= c0*y*(1 + (1/r0)*log(y/c1))
  quasi-analytic scale  y' <= c0*y*(1 + c2*log(y/c1)*log(2 + log(y/c1)))

so the energy is a subsolution of the matching scalar ODE.  Closed-form
supersolutions give the growth envelopes:

  analytic        Y(t) = F0*exp(exp(beta1*t)),        Y(0) = F0*e
  quasi-analytic  Y(t) = F0*exp(exp(exp(beta2*t))),   Y(0) = F0*e^e

with rates

  beta1 = c0 + c0/r0 + (c0/r0)*log(F0/c1)
  beta2 = c0 + c0*c2*(1 + log(F0/c1))*(1 + log(3 + log(F0/c1)))

Both the supersolution check and the equality-case integration are done on
the logarithmic level x = log(y/c1): x' = c0*(1 + x/r0) respectively
x' = c0*(1 + c2*x*log(2+x)), where the inequality Y' >= RHS(Y) divides
through by Y > 0.  This keeps every quantity representable long after the
plain energy value would overflow.

The premise constants c0 and c1 come from a cited estimate, not from this
package; ``calibrate_premise`` fits them along a pilot trajectory so the
envelope checks stay honest.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import Trajectory, alpha_energy_series, measure
from .errors import IncompatibleWeight
from .integrate._dopri5 import dopri5
from .model import Nonlinearity, Weight

_EXPONAND_CAP = 650.0  # keeps log Y and (log Y)' inside double range


@dataclass(frozen=True)
class GrowthEnvelope:
    """Parameters of one growth envelope.

    ``family`` is "analytic" or "quasi_analytic"; ``r0`` is used by the
    first, ``c2`` by the second.  ``beta`` is the envelope rate; build()
    computes it from its defining formula, and it can be overridden (for
    mutation checks) via dataclasses.replace.
    """

    family: str
    c0: float
    c1: float
    f0: float
    beta: float
    r0: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        if self.family not in ("analytic", "quasi_analytic"):
            raise ValueError(f"unknown envelope family {self.family!r}")
        if not (self.c0 > 0.0 and self.c1 > 0.0):
            raise ValueError("premise constants must be positive")
        if self.f0 < self.c1:
            raise ValueError("initial energy must satisfy f0 >= c1")
        if self.family == "analytic" and not (self.r0 or 0.0) > 0.0:
            raise ValueError("analytic envelope needs r0 > 0")
        if self.family == "quasi_analytic" and not (self.c2 or 0.0) > 0.0:
            raise ValueError("quasi-analytic envelope needs c2 > 0")

    @classmethod
    def build(cls, family: str, c0: float, c1: float, f0: float,
              r0: Optional[float] = None, c2: Optional[float] = None) -> "GrowthEnvelope":
        ell = math.log(f0 / c1)
        if family == "analytic":
            beta = c0 + c0 / r0 + (c0 / r0) * ell
        elif family == "quasi_analytic":
            beta = c0 + c0 * c2 * (1.0 + ell) * (1.0 + math.log(3.0 + ell))
        else:
            raise ValueError(f"unknown envelope family {family!r}")
        return cls(family=family, c0=c0, c1=c1, f0=f0, beta=beta, r0=r0, c2=c2)

    def rhs_over_y(self, x):
        """RHS(y)/y at log level x = log(y/c1)."""
        x = np.asarray(x, dtype=float)
        if self.family == "analytic":
            out = self.c0 * (1.0 + x / self.r0)
        else:
            out = self.c0 * (1.0 + self.c2 * x * np.log(2.0 + x))
        return out if out.ndim else float(out)

    def log_envelope(self, t):
        """log Y(t)."""
        t = np.asarray(t, dtype=float)
        if self.family == "analytic":
            out = math.log(self.f0) + np.exp(self.beta * t)
        else:
            out = math.log(self.f0) + np.exp(np.exp(self.beta * t))
        return out if out.ndim else float(out)

    def dlog_envelope(self, t):
        """(log Y)'(t), the supersolution derivative on the log level."""
        t = np.asarray(t, dtype=float)
        if self.family == "analytic":
            out = self.beta * np.exp(self.beta * t)
        else:
            inner = np.exp(self.beta * t)
            out = self.beta * inner * np.exp(inner)
        return out if out.ndim else float(out)

    def overflow_horizon(self) -> float:
        """Largest t at which all log-level quantities stay representable."""
        if self.family == "analytic":
            return _EXPONAND_CAP / self.beta
        return math.log(_EXPONAND_CAP) / self.beta


@dataclass
class ComparisonSolution:
    """Equality-case solution of the comparison ODE, stored on the log level."""

    env: GrowthEnvelope
    times: np.ndarray
    x: np.ndarray                 # log(y/c1) at the recorded times
    overflow_time: Optional[float]

    @property
    def log_y(self) -> np.ndarray:
        return self.x + math.log(self.env.c1)

    def log_y_at(self, t):
        """Cubic Hermite interpolation of log y (derivatives from the ODE)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        h = t1 - t0
        x0 = self.x[idx]
        x1 = self.x[idx + 1]
        s0 = self.env.rhs_over_y(x0)
        s1 = self.env.rhs_over_y(x1)
        z = np.where(h > 0, (t - t0) / np.where(h > 0, h, 1.0), 0.0)
        h00 = (1 + 2 * z) * (1 - z) ** 2
        h10 = z * (1 - z) ** 2
        h01 = z * z * (3 - 2 * z)
        h11 = z * z * (z - 1)
        out = h00 * x0 + h10 * h * s0 + h01 * x1 + h11 * h * s1 + math.log(self.env.c1)
        return out if out.size > 1 else float(out[0])


def integrate_comparison(env: GrowthEnvelope, t_end: float, tol: float = 1e-10,
                         sample_times=None) -> ComparisonSolution:
    """Integrate the equality case y' = RHS(y), y(0) = F0, on the log level.

    If y would exceed 1e300 before t_end, the run is truncated at that
    crossing and the partial solution carries the overflow time.
    """
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    x0 = math.log(env.f0 / env.c1)
    x_cap = math.log(1e300) - math.log(env.c1)

    def rhs(t, xvec):
        return np.array([env.rhs_over_y(float(xvec[0]))])

    raw = dopri5(rhs, 0.0, np.array([x0]), t_end, tol, tol * 1e-3,
                 sample_times=sample_times,
                 stop_condition=lambda t, xv: xv[0] >= x_cap)
    return ComparisonSolution(env=env, times=raw.ts, x=raw.ys[:, 0],
                              overflow_time=raw.stopped_at)


@dataclass
class EnvelopeCheck:
    """Pointwise supersolution verdict on a time grid (log-level quantities)."""

    times: np.ndarray
    lhs: np.ndarray               # (log Y)'
    rhs: np.ndarray               # RHS(Y)/Y
    margin: float                 # min of lhs - rhs
    normalized_margin: float      # min of (lhs - rhs)/scale
    initial_datum_ok: bool
    verdict: bool


def verify_supersolution(env: GrowthEnvelope, t_end: float, n_grid: int = 1000) -> EnvelopeCheck:
    """Check Y' >= RHS(Y) on a log-spaced grid, plus the inflated initial datum.

    The grid is log-spaced to resolve the early regime where the margin is
    smallest; the horizon is clamped to the representable range.  The
    initial-datum relation is Y(0) = F0*e for the analytic family and
    Y(0) = F0*e^e for the quasi-analytic one.
    """
    if n_grid < 100:
        raise ValueError("n_grid must be at least 100")
    horizon = min(t_end, env.overflow_horizon())
    ts = np.concatenate(([0.0], np.geomspace(horizon * 1e-6, horizon, n_grid - 1)))
    lhs = env.dlog_envelope(ts)
    x = env.log_envelope(ts) - math.log(env.c1)
    rhs = env.rhs_over_y(x)
    margins = lhs - rhs
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    normalized = margins / scale
    shift = 1.0 if env.family == "analytic" else math.e
    initial_ok = abs(env.log_envelope(0.0) - (math.log(env.f0) + shift)) <= 1e-12 * max(
        1.0, abs(math.log(env.f0)) + shift)
    verdict = bool(np.min(normalized) >= -1e-9) and initial_ok
    return EnvelopeCheck(times=ts, lhs=lhs, rhs=rhs, margin=float(np.min(margins)),
                         normalized_margin=float(np.min(normalized)),
                         initial_datum_ok=initial_ok, verdict=verdict)


def calibrate_premise(traj: Trajectory, nl: Nonlinearity, weight: Weight):
    """Fit the premise constants (c0, c1) along a pilot trajectory.

    c1 := min(1, nu0 * E_0(0)); c0 is the smallest constant for which the
    sampled inequality F' <= c0*F*(1 + phi^-1(log(F/c1))) holds, with F'
    estimated by central differences on the sample grid.  Returns
    (c0, c1, f_series, premise_ok) where premise_ok records that the
    sampled energy never dipped below c1.
    """
    e0_series = alpha_energy_series(traj.spec, traj.us, traj.vs, 0.0)
    if not float(e0_series[0]) > 0.0:
        raise ValueError("premise calibration needs nonzero initial energy")
    c1 = min(1.0, nl.nu0 * float(e0_series[0]))
    f = np.array([measure(traj.spec, nl, traj.state(i), weight).f_phi
                  for i in range(len(traj))])
    t = traj.times
    premise_ok = bool(np.all(f >= c1 * (1.0 - 1e-12)))
    fprime = (f[2:] - f[:-2]) / (t[2:] - t[:-2])
    x = np.log(np.maximum(f[1:-1] / c1, 1.0))
    inv = np.array([weight.inverse(float(v)) for v in x])
    denom = f[1:-1] * (1.0 + inv)
    c0 = float(np.max(fprime / denom)) if fprime.size else 0.0
    c0 = max(c0, 1e-9)
    return c0, c1, f, premise_ok


@dataclass
class GrowthReport:
    """Simulated weighted energy against its closed-form envelope."""

    times: np.ndarray
    log_f: np.ndarray
    log_envelope: np.ndarray
    margin: np.ndarray            # log_envelope - log_f, pointwise
    max_log_ratio: float          # max of log_f - log_envelope (raw bound)
    alpha_rates: dict             # alpha -> {"rate": r, "fitted_prefactor": B}
    interp_max_violation: float
    verdict: bool


def envelope_vs_simulation(traj: Trajectory, nl: Nonlinearity, weight: Weight,
                           env: GrowthEnvelope, alphas=(0.25, 0.75),
                           kb_lookup=None) -> GrowthReport:
    """Sample the weighted energy along a run and compare with the envelope.

    Also reports, per alpha, the fitted prefactor of the rate-shaped bound
    on the alpha-energy (the rate is 4*alpha*beta for the analytic family
    and max(2, 4*alpha)*beta for the quasi-analytic one), and the worst
    violation of the pointwise interpolation bound tying the alpha-energy
    to the weighted energy (needs ``kb_lookup``: alpha -> K constant).
    """
    if (env.family == "analytic") != (weight.family == "linear"):
        raise IncompatibleWeight(f"envelope {env.family!r} vs weight {weight.family!r}")
    if env.family == "quasi_analytic" and weight.family != "quasi_analytic":
        raise IncompatibleWeight(f"envelope {env.family!r} vs weight {weight.family!r}")

    reports = [measure(traj.spec, nl, traj.state(i), weight) for i in range(len(traj))]
    f = np.array([r.f_phi for r in reports])
    f_hat = np.array([r.f_phi_hat for r in reports])
    log_f = np.log(f)
    log_env = env.log_envelope(traj.times)
    margin = log_env - log_f
    max_log_ratio = float(np.max(log_f - log_env))

    e0_series = alpha_energy_series(traj.spec, traj.us, traj.vs, 0.0)
    alpha_rates = {}
    interp_worst = -math.inf
    for a in alphas:
        ea = alpha_energy_series(traj.spec, traj.us, traj.vs, a)
        rate = (4.0 * a * env.beta if env.family == "analytic"
                else max(2.0, 4.0 * a) * env.beta)
        if env.family == "analytic":
            log_shape = rate * traj.times
        else:
            log_shape = np.exp(rate * traj.times)
        fitted = float(np.exp(np.max(np.log(np.maximum(ea, 1e-300)) - log_shape)))
        alpha_rates[float(a)] = {"rate": float(rate), "fitted_prefactor": fitted}
        if kb_lookup is not None and float(a) in kb_lookup:
            kb = kb_lookup[float(a)]
            y = 2.0 * np.log(np.maximum(f_hat / e0_series, 1.0))
            inv = np.array([weight.inverse(float(v)) for v in y])
            bound = (kb + inv ** (4.0 * a)) * e0_series
            interp_worst = max(interp_worst, float(np.max(ea / bound - 1.0)))
    verdict = max_log_ratio <= 1e-9
    return GrowthReport(times=traj.times, log_f=log_f, log_envelope=log_env,
                        margin=margin, max_log_ratio=max_log_ratio,
                        alpha_rates=alpha_rates,
                        interp_max_violation=(interp_worst if interp_worst > -math.inf
                                              else float("nan")),
                        verdict=verdict)


def perturbed(env: GrowthEnvelope, beta_scale: float) -> GrowthEnvelope:
    """Envelope with a deliberately scaled rate (for mutation checks)."""
    return dataclasses.replace(env, beta=beta_scale * env.beta)
