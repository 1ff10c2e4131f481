"""Trajectory integration and energy observables for the truncated system.

The truncated wave system decouples mode-by-mode except through the scalar
nonlocal coefficient, so states are pairs of coordinate vectors (u, v) with
v = u'.  Energies are plain weighted sums over modes:

* Hamiltonian        H  = |v|^2 + M(|A^(1/2) u|^2), conserved exactly by
  the flow; its recorded drift is the integration-quality monitor.
* Sobolev energy     E  = |v|^2 + |A^(1/4) v|^2 + |A^(1/2) u|^2 + |A^(3/4) u|^2
* alpha-energy       E_a = |A^a v|^2 + |A^(a+1/2) u|^2
* corrected weighted energy F = sum max(1,lam) * a_k * exp(phi(lam)), with
  a_k = v_k^2 + m(.) lam^2 u_k^2; the uncorrected variant drops the m factor.

Conservation is monitored a posteriori, never enforced by projection, so it
stays an independent check of the stepper.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import integrate
from .errors import (CoefficientBoundViolated, DriftExceeded, NonFiniteState)
from .model import Nonlinearity, Weight
from .spectral import Spectrum, split


@dataclass(frozen=True)
class State:
    """Mode coordinates (u, v) at a time t, with v = u'."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-d arrays of the same length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and math.isfinite(self.t)):
            raise NonFiniteState("state coordinates must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


@dataclass
class SolverInfo:
    tol: float
    backend: str
    n_steps: int
    n_accepted: int
    n_rejected: int
    ham_drift: Optional[float] = None


@dataclass
class Trajectory:
    """Time-ordered samples (user grid merged with all accepted steps)."""

    spec: Spectrum
    times: np.ndarray
    us: np.ndarray
    vs: np.ndarray
    info: SolverInfo
    rhs: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> State:
        return State(t=float(self.times[i]), u=self.us[i], v=self.vs[i])

    @property
    def initial(self) -> State:
        return self.state(0)

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)


class SinusoidalCoefficient:
    """Propagation speed c(t) = offset + amplitude*sin(omega*t + phase).

    Carries its exact bounds, which makes randomized Gronwall checks
    certifiable without numerical differentiation.
    """

    def __init__(self, offset: float, amplitude: float, omega: float, phase: float = 0.0):
        if offset - abs(amplitude) <= 0.0:
            raise ValueError("speed must stay positive: offset must exceed |amplitude|")
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.phase = float(phase)

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.omega * t + self.phase)

    @property
    def lower(self) -> float:
        return self.offset - abs(self.amplitude)

    @property
    def upper(self) -> float:
        return self.offset + abs(self.amplitude)

    @property
    def slope_bound(self) -> float:
        return abs(self.amplitude) * abs(self.omega)


def _merge_samples(ts, ys, sample_ts, sample_ys):
    """Merge accepted steps with the user grid into strictly increasing times."""
    if sample_ts.size == 0:
        return ts, ys
    all_t = np.concatenate((ts, sample_ts))
    all_y = np.vstack((ys, sample_ys))
    order = np.argsort(all_t, kind="stable")
    all_t = all_t[order]
    all_y = all_y[order]
    keep = np.empty(all_t.size, dtype=bool)
    keep[0] = True
    keep[1:] = np.diff(all_t) > 0.0
    return all_t[keep], all_y[keep]


def _nl_dispatch(nl: Nonlinearity):
    if nl.family == "constant":
        return 0, nl.intercept, 0.0, None
    if nl.family == "affine":
        return 1, nl.intercept, nl.slope_coeff, None
    return 2, 0.0, 0.0, nl.m


def _validate_tol(tol: float):
    if not (1e-14 <= tol <= 1e-3):
        raise ValueError(f"tol must lie in [1e-14, 1e-3], got {tol}")


def hamiltonian_series(spec: Spectrum, nl: Nonlinearity, us: np.ndarray, vs: np.ndarray):
    sigmas = (us * us) @ spec.lam2
    kinetic = np.sum(vs * vs, axis=1)
    return kinetic + np.array([nl.M(s) for s in sigmas])


def sobolev_series(spec: Spectrum, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    lam = spec.lam
    u2 = us * us
    v2 = vs * vs
    return (np.sum(v2, axis=1) + v2 @ lam + u2 @ (lam ** 2) + u2 @ (lam ** 3))


def alpha_energy_series(spec: Spectrum, us, vs, alpha: float) -> np.ndarray:
    wv = spec.power_weights(alpha) ** 2
    wu = spec.power_weights(alpha + 0.5) ** 2
    return (vs * vs) @ wv + (us * us) @ wu


def evolve_kirchhoff(spec: Spectrum, nl: Nonlinearity, init: State, t_end: float,
                     tol: float, sample_times=None, backend=None) -> Trajectory:
    """Integrate u_k'' = -m(sum lam_j^2 u_j^2) * lam_k^2 * u_k.

    The conserved Hamiltonian is evaluated on every recorded time; a drift
    beyond 1e3*tol signals step-size failure and raises DriftExceeded.
    """
    _validate_tol(tol)
    if not t_end > init.t:
        raise ValueError("t_end must exceed the initial time")
    u0 = spec.check_vector(init.u)
    v0 = spec.check_vector(init.v)
    kind, p0, p1, fn = _nl_dispatch(nl)
    backend = backend or integrate.default_backend()
    res = integrate.integrate_kirchhoff(
        spec.lam2, np.concatenate((u0, v0)), init.t, t_end, tol, tol * 1e-3,
        kind, p0, p1, fn, sample_times, backend=backend)
    times, ys = _merge_samples(res.ts, res.ys, res.sample_ts, res.sample_ys)
    n = spec.n
    us, vs = ys[:, :n], ys[:, n:]
    hs = hamiltonian_series(spec, nl, us, vs)
    drift = float(np.max(np.abs(hs - hs[0])) / max(1.0, abs(hs[0])))
    info = SolverInfo(tol=tol, backend=backend, n_steps=res.n_steps,
                      n_accepted=res.n_accepted, n_rejected=res.n_rejected,
                      ham_drift=drift)
    lam2 = spec.lam2

    def rhs(t, y):
        u = y[:n]
        sigma = float(lam2 @ (u * u))
        return np.concatenate((y[n:], -nl.m(sigma) * lam2 * u))

    traj = Trajectory(spec=spec, times=times, us=us, vs=vs, info=info, rhs=rhs)
    if drift > 1e3 * tol:
        raise DriftExceeded(f"Hamiltonian drift {drift:.3e} exceeds 1e3*tol = {1e3 * tol:.1e}")
    return traj


def evolve_linear(spec: Spectrum, c: Union[float, SinusoidalCoefficient, Callable],
                  init: State, t_end: float, tol: float,
                  nu0: Optional[float] = None, c_max: Optional[float] = None,
                  slope_bound: Optional[float] = None,
                  sample_times=None, backend=None) -> Trajectory:
    """Integrate z_k'' = -c(t) * lam_k^2 * z_k with certified speed bounds.

    ``nu0 <= c(t) <= c_max`` must hold on the window; every sampled value is
    checked against the declared range and a violation raises
    CoefficientBoundViolated.  For SinusoidalCoefficient the exact bounds
    are derived when not supplied.
    """
    _validate_tol(tol)
    if not t_end > init.t:
        raise ValueError("t_end must exceed the initial time")
    u0 = spec.check_vector(init.u)
    v0 = spec.check_vector(init.v)

    if isinstance(c, (int, float)):
        kind, a, b, w, p, fn = 0, float(c), 0.0, 0.0, 0.0, None
        nu0 = float(c) if nu0 is None else nu0
        c_max = float(c) if c_max is None else c_max
        slope_bound = 0.0 if slope_bound is None else slope_bound
    elif isinstance(c, SinusoidalCoefficient):
        kind, a, b, w, p, fn = 1, c.offset, c.amplitude, c.omega, c.phase, None
        nu0 = c.lower if nu0 is None else nu0
        c_max = c.upper if c_max is None else c_max
        slope_bound = c.slope_bound if slope_bound is None else slope_bound
    else:
        if nu0 is None or c_max is None or slope_bound is None:
            raise ValueError("callable speeds need explicit nu0, c_max, slope_bound")
        kind, a, b, w, p, fn = 2, 0.0, 0.0, 0.0, 0.0, c
    if not nu0 > 0.0:
        raise ValueError("lower speed bound must be positive")

    backend = backend or integrate.default_backend()
    res = integrate.integrate_linear(
        spec.lam2, np.concatenate((u0, v0)), init.t, t_end, tol, tol * 1e-3,
        kind, a, b, w, p, fn, sample_times, backend=backend)
    slack = 1e-9 * max(1.0, abs(c_max))
    if res.coef_min < nu0 - slack or res.coef_max > c_max + slack:
        raise CoefficientBoundViolated(
            f"sampled speed range [{res.coef_min:.6g}, {res.coef_max:.6g}] "
            f"leaves declared [{nu0:.6g}, {c_max:.6g}]")
    times, ys = _merge_samples(res.ts, res.ys, res.sample_ts, res.sample_ys)
    n = spec.n
    us, vs = ys[:, :n], ys[:, n:]
    info = SolverInfo(tol=tol, backend=backend, n_steps=res.n_steps,
                      n_accepted=res.n_accepted, n_rejected=res.n_rejected,
                      ham_drift=None)
    c_of_t = (lambda t: a) if kind == 0 else (c if callable(c) else None)
    lam2 = spec.lam2

    def rhs(t, y):
        return np.concatenate((y[n:], -float(c_of_t(t)) * lam2 * y[:n]))

    return Trajectory(spec=spec, times=times, us=us, vs=vs, info=info, rhs=rhs)


@dataclass
class EnergyReport:
    """All energies of one state: Hamiltonian, Sobolev, alpha-map, weighted."""

    hamiltonian: float
    sobolev: float
    alpha_energies: dict
    f_phi: float
    f_phi_hat: float
    split: Optional[tuple] = None


def measure(spec: Spectrum, nl: Nonlinearity, state: State, weight: Weight,
            alphas=(), cutoff: Optional[float] = None) -> EnergyReport:
    """Evaluate every energy observable of one state."""
    u = spec.check_vector(state.u)
    v = spec.check_vector(state.v)
    lam = spec.lam
    u2, v2 = u * u, v * v
    sigma = float(spec.lam2 @ u2)
    ham = float(v2.sum() + nl.M(sigma))
    sobolev = float(v2.sum() + v2 @ lam + u2 @ (lam ** 2) + u2 @ (lam ** 3))
    alpha_energies = {
        float(a): float((v2 @ spec.power_weights(a) ** 2)
                        + (u2 @ spec.power_weights(a + 0.5) ** 2))
        for a in alphas
    }
    wexp = np.maximum(1.0, lam) * np.exp(weight(lam))
    m_val = nl.m(sigma)
    a_k = v2 + m_val * spec.lam2 * u2
    a_k_hat = v2 + spec.lam2 * u2
    f_phi = float(wexp @ a_k)
    f_phi_hat = float(wexp @ a_k_hat)
    split_pair = None
    if cutoff is not None:
        lo_u = split(spec, u, cutoff)
        lo_v = split(spec, v, cutoff)
        e_low = float((lo_v.low ** 2).sum() + (lo_v.low ** 2) @ lam
                      + (lo_u.low ** 2) @ (lam ** 2) + (lo_u.low ** 2) @ (lam ** 3))
        e_high = float((lo_v.high ** 2).sum() + (lo_v.high ** 2) @ lam
                       + (lo_u.high ** 2) @ (lam ** 2) + (lo_u.high ** 2) @ (lam ** 3))
        split_pair = (e_low, e_high)
    return EnergyReport(hamiltonian=ham, sobolev=sobolev, alpha_energies=alpha_energies,
                        f_phi=f_phi, f_phi_hat=f_phi_hat, split=split_pair)


def _blowup_indicator(spec: Spectrum, us, vs) -> np.ndarray:
    """|A^(1/4) v|^2 + |A^(3/4) u|^2 along the samples."""
    lam = spec.lam
    return (vs * vs) @ lam + (us * us) @ (lam ** 3)


def escape_time(traj: Trajectory, threshold: float) -> Optional[float]:
    """First time the blow-up indicator reaches the threshold, if ever.

    The first crossing is bracketed by consecutive samples and refined by
    bisection on a cubic Hermite interpolant of the indicator.
    """
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    g = _blowup_indicator(traj.spec, traj.us, traj.vs)
    above = np.nonzero(g >= threshold)[0]
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(traj.times[0])

    t0, t1 = float(traj.times[i - 1]), float(traj.times[i])
    g0, g1 = float(g[i - 1]), float(g[i])
    lam = traj.spec.lam
    lam3 = lam ** 3

    def g_slope(j: int) -> float:
        u, v = traj.us[j], traj.vs[j]
        if traj.rhs is not None:
            y = np.concatenate((u, v))
            dy = traj.rhs(float(traj.times[j]), y)
            vdot = dy[traj.spec.n:]
        else:
            k = max(j - 1, 0)
            dt = float(traj.times[j] - traj.times[k]) or 1.0
            vdot = (traj.vs[j] - traj.vs[k]) / dt
        return float(2.0 * (v * vdot) @ lam + 2.0 * (u * v) @ lam3)

    s0, s1 = g_slope(i - 1), g_slope(i)
    h = t1 - t0

    def hermite(t: float) -> float:
        x = (t - t0) / h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        return h00 * g0 + h10 * h * s0 + h01 * g1 + h11 * h * s1

    lo, hi = t0, t1
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if hermite(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def trajectory_to_json(traj: Trajectory) -> str:
    """Lossless JSON form (shortest-repr floats round-trip bit-exactly)."""
    payload = {
        "spectrum": list(traj.spec.lam),
        "times": list(traj.times),
        "u": [list(row) for row in traj.us],
        "v": [list(row) for row in traj.vs],
        "info": {
            "tol": traj.info.tol,
            "backend": traj.info.backend,
            "n_steps": traj.info.n_steps,
            "n_accepted": traj.info.n_accepted,
            "n_rejected": traj.info.n_rejected,
            "ham_drift": traj.info.ham_drift,
        },
    }
    return json.dumps(payload)


def trajectory_from_json(text: str) -> Trajectory:
    payload = json.loads(text)
    info = payload["info"]
    return Trajectory(
        spec=Spectrum(np.asarray(payload["spectrum"], dtype=float)),
        times=np.asarray(payload["times"], dtype=float),
        us=np.asarray(payload["u"], dtype=float),
        vs=np.asarray(payload["v"], dtype=float),
        info=SolverInfo(tol=info["tol"], backend=info["backend"],
                        n_steps=info["n_steps"], n_accepted=info["n_accepted"],
                        n_rejected=info["n_rejected"], ham_drift=info["ham_drift"]),
    )


def trajectory_to_csv(traj: Trajectory, nl: Nonlinearity, out,
                      weight: Optional[Weight] = None) -> None:
    """Write t, per-mode u_k and v_k, H, E (and F_phi when a weight is given)."""
    close = False
    if isinstance(out, (str, bytes)):
        out = open(out, "w", newline="")
        close = True
    try:
        writer = csv.writer(out)
        n = traj.spec.n
        header = (["t"] + [f"u_{k+1}" for k in range(n)] + [f"v_{k+1}" for k in range(n)]
                  + ["H", "E"])
        if weight is not None:
            header.append("F_phi")
        writer.writerow(header)
        hs = hamiltonian_series(traj.spec, nl, traj.us, traj.vs)
        es = sobolev_series(traj.spec, traj.us, traj.vs)
        for i in range(len(traj)):
            row = ([repr(float(traj.times[i]))]
                   + [repr(float(x)) for x in traj.us[i]]
                   + [repr(float(x)) for x in traj.vs[i]]
                   + [repr(float(hs[i])), repr(float(es[i]))])
            if weight is not None:
                rep = measure(traj.spec, nl, traj.state(i), weight)
                row.append(repr(rep.f_phi))
            writer.writerow(row)
    finally:
        if close:
            out.close()
