"""Integrator backends: compiled stepper when built, NumPy fallback otherwise.

Both lanes implement the same embedded 5(4) pair with PI step control and
dense output; the compiled lane only specializes the two hot right-hand
sides.  Set ``KIRCHSIM_BACKEND=python`` to force the fallback (used by the
benchmark and by cross-lane tests).
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteState
from ._dopri5 import dopri5

try:
    from . import _core
except ImportError:  # pure-Python install
    _core = None

_ENV_BACKEND = os.environ.get("KIRCHSIM_BACKEND")


def available_backends():
    names = ["python"]
    if _core is not None:
        names.insert(0, "compiled")
    return names


def default_backend() -> str:
    if _ENV_BACKEND is not None:
        if _ENV_BACKEND not in available_backends():
            raise RuntimeError(f"requested backend {_ENV_BACKEND!r} is not available")
        return _ENV_BACKEND
    return "compiled" if _core is not None else "python"


@dataclass
class StepperResult:
    ts: np.ndarray
    ys: np.ndarray
    sample_ts: np.ndarray
    sample_ys: np.ndarray
    n_steps: int
    n_accepted: int
    n_rejected: int
    coef_min: float = np.inf
    coef_max: float = -np.inf


def _as_samples(sample_times):
    if sample_times is None:
        return np.empty(0)
    s = np.asarray(sample_times, dtype=float)
    if s.ndim != 1:
        raise ValueError("sample times must be a 1-d array")
    if s.size and np.any(np.diff(s) < 0):
        raise ValueError("sample times must be sorted")
    return s


def _status_message(status: int, nonfinite: bool) -> str:
    if status == 2:
        return "step budget exhausted; integration not converging"
    if nonfinite:
        return "state became non-finite and step size underflowed"
    return "step size underflow"


def _check_final(ys):
    if not np.all(np.isfinite(ys)):
        raise NonFiniteState("integration produced non-finite coordinates")


def integrate_kirchhoff(lam2, y0, t0, t_end, rtol, atol, m_kind, m_p0, m_p1,
                        m_fn, sample_times=None, backend=None) -> StepperResult:
    """m_kind: 0 constant m = m_p0, 1 affine m = m_p0 + m_p1*sigma, 2 callable."""
    lam2 = np.ascontiguousarray(lam2, dtype=float)
    y0 = np.ascontiguousarray(y0, dtype=float)
    samples = _as_samples(sample_times)
    backend = backend or default_backend()
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend not built")
        out = _core.drive(0, lam2, y0, t0, t_end, rtol, atol,
                          m_kind, m_p0, m_p1, 0.0, 0.0, m_fn, samples)
        ts, ys, sample_ys, n_steps, n_acc, n_rej, cmin, cmax, status, nonfinite = out
        if status:
            raise NonFiniteState(_status_message(status, nonfinite))
        _check_final(ys)
        return StepperResult(ts, ys, samples, sample_ys, n_steps, n_acc, n_rej)
    if backend != "python":
        raise ValueError(f"unknown backend {backend!r}")

    n = lam2.size

    def rhs(t, y):
        u = y[:n]
        v = y[n:]
        sigma = float(lam2 @ (u * u))
        if m_kind == 0:
            m = m_p0
        elif m_kind == 1:
            m = m_p0 + m_p1 * sigma
        else:
            m = float(m_fn(sigma))
        return np.concatenate((v, -m * lam2 * u))

    raw = dopri5(rhs, t0, y0, t_end, rtol, atol, samples)
    _check_final(raw.ys)
    return StepperResult(raw.ts, raw.ys, raw.sample_ts, raw.sample_ys,
                         raw.n_steps, raw.n_accepted, raw.n_rejected)


def integrate_linear(lam2, y0, t0, t_end, rtol, atol, c_kind, c_a, c_b, c_w,
                     c_p, c_fn, sample_times=None, backend=None) -> StepperResult:
    """c_kind: 0 constant c = c_a, 1 sinusoid c_a + c_b*sin(c_w*t + c_p), 2 callable."""
    lam2 = np.ascontiguousarray(lam2, dtype=float)
    y0 = np.ascontiguousarray(y0, dtype=float)
    samples = _as_samples(sample_times)
    backend = backend or default_backend()
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend not built")
        out = _core.drive(1, lam2, y0, t0, t_end, rtol, atol,
                          c_kind, c_a, c_b, c_w, c_p, c_fn, samples)
        ts, ys, sample_ys, n_steps, n_acc, n_rej, cmin, cmax, status, nonfinite = out
        if status:
            raise NonFiniteState(_status_message(status, nonfinite))
        _check_final(ys)
        return StepperResult(ts, ys, samples, sample_ys, n_steps, n_acc, n_rej, cmin, cmax)
    if backend != "python":
        raise ValueError(f"unknown backend {backend!r}")

    n = lam2.size
    seen = [np.inf, -np.inf]

    def rhs(t, y):
        if c_kind == 0:
            c = c_a
        elif c_kind == 1:
            c = c_a + c_b * np.sin(c_w * t + c_p)
        else:
            c = float(c_fn(t))
        if c < seen[0]:
            seen[0] = c
        if c > seen[1]:
            seen[1] = c
        return np.concatenate((y[n:], -c * lam2 * y[:n]))

    raw = dopri5(rhs, t0, y0, t_end, rtol, atol, samples)
    _check_final(raw.ys)
    return StepperResult(raw.ts, raw.ys, raw.sample_ts, raw.sample_ys,
                         raw.n_steps, raw.n_accepted, raw.n_rejected,
                         seen[0], seen[1])
