"""Dormand-Prince 5(4) embedded pair with PI step control and dense output.

The fifth-order solution is propagated; the embedded fourth-order solution
supplies the local error estimate.  Step sizes follow the classical
PI ("Lund") stabilized controller.  Dense output is the standard
fourth-order interpolant of this pair, used to honor user sample grids
without constraining the step sequence.

This module is the pure-Python lane; the compiled extension implements the
same algorithm for the two specialized right-hand sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteState

# stage coefficients
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# error = h * sum(E_i * k_i), difference of the 5th and 4th order weights
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# dense-output coefficients
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

SAFE = 0.9
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
FAC_SHRINK = 5.0   # max factor by which a step may shrink (h/5)
FAC_GROW = 0.1     # reciprocal of the max growth factor (10h)
MAX_STEPS = 20_000_000


@dataclass
class RawSolution:
    """Accepted-step states plus dense-output values at requested times."""

    ts: np.ndarray
    ys: np.ndarray
    sample_ts: np.ndarray
    sample_ys: np.ndarray
    n_steps: int
    n_accepted: int
    n_rejected: int
    stopped_at: float | None = None


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(rhs, t0, y0, f0, t_end, rtol, atol):
    sc = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(t0 + h0, y1), dtype=float)
    d2 = _rms((f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, t_end - t0)
    if not math.isfinite(h):
        # non-finite rhs at the initial state; start tiny and let the
        # rejection path diagnose it
        h = min(1e-6, t_end - t0)
    return h


def _dense(theta, h, y, ydiff, bspl, r4, r5):
    return y + theta * (ydiff + (1.0 - theta) * (bspl + theta * (r4 + (1.0 - theta) * r5)))


def dopri5(rhs, t0: float, y0, t_end: float, rtol: float, atol: float,
           sample_times=None, stop_condition=None) -> RawSolution:
    """Integrate y' = rhs(t, y) from t0 to t_end.

    Records every accepted step and evaluates the dense interpolant at
    ``sample_times`` (must be sorted, inside [t0, t_end]).  Raises
    NonFiniteState if the state degenerates and the step size underflows.

    ``stop_condition(t, y)`` truncates the run at the first accepted step
    where it turns true; the crossing is refined by bisection on the dense
    interpolant (the condition is assumed monotone within that step) and
    reported in ``stopped_at``.
    """
    y = np.array(y0, dtype=float).copy()
    dim = y.size
    if sample_times is None:
        sample_times = np.empty(0)
    samples = np.asarray(sample_times, dtype=float)
    if samples.size and (samples[0] < t0 - 1e-12 or samples[-1] > t_end + 1e-12):
        raise ValueError("sample times must lie inside the integration window")

    f = np.asarray(rhs(t0, y), dtype=float)
    if f.shape != y.shape:
        raise ValueError("rhs shape does not match state shape")
    h = _initial_step(rhs, t0, y, f, t_end, rtol, atol)

    ts = [t0]
    ys = [y.copy()]
    sample_ys = np.empty((samples.size, dim))
    sp = 0
    while sp < samples.size and samples[sp] <= t0:
        sample_ys[sp] = y
        sp += 1

    t = t0
    facold = 1e-4
    n_steps = n_accepted = n_rejected = 0
    last_rejected = False
    nonfinite_seen = False

    while t < t_end:
        if n_steps >= MAX_STEPS:
            raise NonFiniteState("step budget exhausted; integration not converging")
        h = min(h, t_end - t)
        if not math.isfinite(h) or h < 1e-14 * max(1.0, abs(t)):
            if nonfinite_seen:
                raise NonFiniteState("state became non-finite and step size underflowed")
            raise NonFiniteState("step size underflow")
        n_steps += 1

        k1 = f
        k2 = np.asarray(rhs(t + C2 * h, y + h * (A21 * k1)), dtype=float)
        k3 = np.asarray(rhs(t + C3 * h, y + h * (A31 * k1 + A32 * k2)), dtype=float)
        k4 = np.asarray(rhs(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3)), dtype=float)
        k5 = np.asarray(rhs(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)),
                        dtype=float)
        k6 = np.asarray(rhs(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
                        dtype=float)
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = np.asarray(rhs(t + h, ynew), dtype=float)

        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = _rms(err_vec / sc)

        if not math.isfinite(err):
            nonfinite_seen = True
            n_rejected += 1
            last_rejected = True
            h *= 0.1
            continue

        fac11 = err ** EXPO1
        if err <= 1.0:
            # accept; controller uses the error of the previous accepted step
            fac = fac11 / (facold ** BETA)
            fac = max(FAC_GROW, min(FAC_SHRINK, fac / SAFE))
            if last_rejected:
                fac = max(fac, 1.0)
            facold = max(err, 1e-4)
            t_new = t + h
            need_dense = (sp < samples.size and samples[sp] <= t_new)
            stopping = stop_condition is not None and stop_condition(t_new, ynew)
            if need_dense or stopping:
                ydiff = ynew - y
                bspl = h * k1 - ydiff
                r4 = ydiff - h * k7 - bspl
                r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            if stopping:
                lo, hi = 0.0, 1.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if stop_condition(t + mid * h, _dense(mid, h, y, ydiff, bspl, r4, r5)):
                        hi = mid
                    else:
                        lo = mid
                theta_stop = hi
                t_stop = t + theta_stop * h
                y_stop = _dense(theta_stop, h, y, ydiff, bspl, r4, r5)
                while sp < samples.size and samples[sp] <= t_stop:
                    theta = (samples[sp] - t) / h
                    sample_ys[sp] = _dense(theta, h, y, ydiff, bspl, r4, r5)
                    sp += 1
                ts.append(t_stop)
                ys.append(y_stop)
                n_accepted += 1
                return RawSolution(
                    ts=np.asarray(ts), ys=np.asarray(ys),
                    sample_ts=samples[:sp], sample_ys=sample_ys[:sp],
                    n_steps=n_steps, n_accepted=n_accepted, n_rejected=n_rejected,
                    stopped_at=t_stop,
                )
            if need_dense:
                while sp < samples.size and samples[sp] <= t_new:
                    theta = (samples[sp] - t) / h
                    sample_ys[sp] = _dense(theta, h, y, ydiff, bspl, r4, r5)
                    sp += 1
            h_next = h / fac
            t = t_new
            y = ynew
            f = k7
            ts.append(t)
            ys.append(y.copy())
            n_accepted += 1
            last_rejected = False
            h = h_next
        else:
            n_rejected += 1
            last_rejected = True
            h = h / min(FAC_SHRINK, fac11 / SAFE)

    while sp < samples.size:
        sample_ys[sp] = y
        sp += 1

    return RawSolution(
        ts=np.asarray(ts), ys=np.asarray(ys),
        sample_ts=samples, sample_ys=sample_ys,
        n_steps=n_steps, n_accepted=n_accepted, n_rejected=n_rejected,
    )
