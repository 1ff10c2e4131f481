import numpy as np
import pytest

import kirchsim as ks
from kirchsim.errors import CoefficientBoundViolated, NonFiniteState
from kirchsim.integrate._dopri5 import dopri5


def _grid_rows(traj, grid):
    idx = np.searchsorted(traj.times, grid)
    assert np.array_equal(traj.times[idx], grid)
    return idx


def test_single_mode_oscillator(backend):
    spec = ks.Spectrum(np.array([1.0]))
    nl = ks.Nonlinearity.constant(1.0)
    init = ks.State(t=0.0, u=np.array([1.0]), v=np.array([0.0]))
    grid = np.linspace(0.0, 10.0, 21)
    traj = ks.evolve_kirchhoff(spec, nl, init, 10.0, 1e-10,
                               sample_times=grid, backend=backend)
    idx = _grid_rows(traj, grid)
    np.testing.assert_allclose(traj.us[idx, 0], np.cos(grid), atol=1e-8)
    np.testing.assert_allclose(traj.vs[idx, 0], -np.sin(grid), atol=1e-8)


def test_zero_data_stays_zero(backend):
    spec = ks.string_spectrum(3)
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.zeros(3), v=np.zeros(3))
    traj = ks.evolve_kirchhoff(spec, nl, init, 5.0, 1e-8, backend=backend)
    assert np.all(traj.us == 0.0)
    assert np.all(traj.vs == 0.0)


def test_two_mode_halved_tolerance_oracle(backend):
    spec = ks.Spectrum(np.array([1.0, 2.0]))
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([0.1, 0.1]), v=np.zeros(2))
    grid = np.linspace(0.0, 50.0, 201)
    tol = 1e-8
    run = ks.evolve_kirchhoff(spec, nl, init, 50.0, tol,
                              sample_times=grid, backend=backend)
    ref = ks.evolve_kirchhoff(spec, nl, init, 50.0, tol / 100.0,
                              sample_times=grid, backend=backend)
    ia, ib = _grid_rows(run, grid), _grid_rows(ref, grid)
    sup = max(np.max(np.abs(run.us[ia] - ref.us[ib])),
              np.max(np.abs(run.vs[ia] - ref.vs[ib])))
    assert sup <= 10.0 * tol


def test_time_reversal(backend):
    spec = ks.Spectrum(np.array([0.8, 1.7, 2.4]))
    nl = ks.Nonlinearity.affine(1.0)
    rng = np.random.default_rng(5)
    init = ks.State(t=0.0, u=0.3 * rng.standard_normal(3), v=0.2 * rng.standard_normal(3))
    tol = 1e-10
    fwd = ks.evolve_kirchhoff(spec, nl, init, 30.0, tol, backend=backend)
    back = ks.evolve_kirchhoff(
        spec, nl, ks.State(t=0.0, u=fwd.final.u, v=-fwd.final.v), 30.0, tol,
        backend=backend)
    err = max(np.max(np.abs(back.final.u - init.u)),
              np.max(np.abs(back.final.v + init.v)))
    assert err <= 100.0 * tol


def test_deterministic_repetition(backend):
    spec = ks.string_spectrum(4)
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([0.2, -0.1, 0.05, 0.01]), v=np.zeros(4))
    a = ks.evolve_kirchhoff(spec, nl, init, 7.0, 1e-9, backend=backend)
    b = ks.evolve_kirchhoff(spec, nl, init, 7.0, 1e-9, backend=backend)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.us, b.us)
    np.testing.assert_array_equal(a.vs, b.vs)


def test_backend_cross_agreement():
    if len(ks.integrate.available_backends()) < 2:
        pytest.skip("single backend build")
    spec = ks.Spectrum(np.array([1.0, 2.0]))
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([0.1, 0.1]), v=np.zeros(2))
    grid = np.linspace(0.0, 50.0, 101)
    a = ks.evolve_kirchhoff(spec, nl, init, 50.0, 1e-10,
                            sample_times=grid, backend="compiled")
    b = ks.evolve_kirchhoff(spec, nl, init, 50.0, 1e-10,
                            sample_times=grid, backend="python")
    ia, ib = _grid_rows(a, grid), _grid_rows(b, grid)
    assert np.max(np.abs(a.us[ia] - b.us[ib])) <= 1e-9


def test_custom_nonlinearity_backend_callback(backend):
    nl = ks.Nonlinearity.custom(lambda s: 1.0 + 0.5 * s, nu0=1.0)
    ref = ks.Nonlinearity.affine(1.0, slope=0.5)
    spec = ks.Spectrum(np.array([1.0, 1.7]))
    init = ks.State(t=0.0, u=np.array([0.3, -0.2]), v=np.array([0.1, 0.0]))
    a = ks.evolve_kirchhoff(spec, nl, init, 5.0, 1e-10, backend=backend)
    b = ks.evolve_kirchhoff(spec, ref, init, 5.0, 1e-10, backend=backend)
    assert np.max(np.abs(a.final.u - b.final.u)) <= 1e-12


def test_nonfinite_state_raised(backend):
    def bad_m(sigma):
        return 1.0 + sigma if sigma < 2.0 else float("nan")

    nl = ks.Nonlinearity.custom(bad_m, nu0=1.0, check_range=1.0)
    spec = ks.Spectrum(np.array([2.0]))
    # sigma starts at 1 and the energy pushes it past the NaN region mid-run
    init = ks.State(t=0.0, u=np.array([0.5]), v=np.array([2.0]))
    with pytest.raises(NonFiniteState):
        ks.evolve_kirchhoff(spec, nl, init, 10.0, 1e-8, backend=backend)


def test_nonfinite_initial_rhs_raises_quickly(backend):
    # NaN already at the initial state: the guarded step heuristic must
    # fail fast instead of looping on a NaN step size
    nl = ks.Nonlinearity.custom(lambda s: float("nan") if s > 0.5 else 1.0,
                                nu0=1.0, check_range=0.4)
    spec = ks.Spectrum(np.array([2.0]))
    init = ks.State(t=0.0, u=np.array([1.0]), v=np.array([0.0]))
    with pytest.raises(NonFiniteState):
        ks.evolve_kirchhoff(spec, nl, init, 10.0, 1e-8, backend=backend)


def test_runaway_energy_reports_failure():
    # loose tolerance on a violently nonlinear mode: the energy monitor or
    # the step controller must refuse to deliver the run silently; this
    # path walks ~1e6 steps, so it runs on the default backend only
    spec = ks.Spectrum(np.array([16.0]))
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([1.0]), v=np.array([0.0]))
    with pytest.raises((NonFiniteState, ks.errors.DriftExceeded)):
        ks.evolve_kirchhoff(spec, nl, init, 100.0, 1e-3)


def test_drift_exceeded():
    spec = ks.Spectrum(np.array([30.0]))
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([1.0 / 30.0]), v=np.array([0.0]))
    with pytest.raises(ks.errors.DriftExceeded):
        ks.evolve_kirchhoff(spec, nl, init, 200.0, 1e-3)


def test_linear_sinusoid_bound_tracking(backend):
    c = ks.SinusoidalCoefficient(2.0, 1.0, 1.0)
    spec = ks.Spectrum(np.array([1.0]))
    init = ks.State(t=0.0, u=np.array([1.0]), v=np.array([0.5]))
    traj = ks.evolve_linear(spec, c, init, 8.0, 1e-9, backend=backend)
    assert len(traj) > 2
    with pytest.raises(CoefficientBoundViolated):
        ks.evolve_linear(spec, c, init, 8.0, 1e-9, nu0=1.5, c_max=3.0,
                         backend=backend)


def test_linear_callable_speed(backend):
    spec = ks.Spectrum(np.array([1.3]))
    init = ks.State(t=0.0, u=np.array([0.5]), v=np.array([0.0]))
    traj = ks.evolve_linear(spec, lambda t: 2.0 + np.sin(t), init, 6.0, 1e-9,
                            nu0=1.0, c_max=3.0, slope_bound=1.0, backend=backend)
    ref = ks.evolve_linear(spec, ks.SinusoidalCoefficient(2.0, 1.0, 1.0), init,
                           6.0, 1e-9, backend=backend)
    assert abs(traj.final.u[0] - ref.final.u[0]) <= 1e-10


def test_tolerance_window_enforced():
    spec = ks.Spectrum(np.array([1.0]))
    nl = ks.Nonlinearity.constant(1.0)
    init = ks.State(t=0.0, u=np.array([1.0]), v=np.array([0.0]))
    with pytest.raises(ValueError):
        ks.evolve_kirchhoff(spec, nl, init, 1.0, 1e-2)
    with pytest.raises(ValueError):
        ks.evolve_kirchhoff(spec, nl, init, 0.0, 1e-8)


def test_generic_driver_stop_condition():
    sol = dopri5(lambda t, y: y, 0.0, np.array([1.0]), 10.0, 1e-10, 1e-13,
                 stop_condition=lambda t, y: y[0] >= np.e)
    assert sol.stopped_at == pytest.approx(1.0, abs=1e-7)
    assert sol.ys[-1, 0] == pytest.approx(np.e, rel=1e-7)


def test_sample_grid_recorded_exactly(backend):
    spec = ks.string_spectrum(2)
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.array([0.1, 0.05]), v=np.zeros(2))
    grid = np.linspace(0.0, 3.0, 17)
    traj = ks.evolve_kirchhoff(spec, nl, init, 3.0, 1e-9,
                               sample_times=grid, backend=backend)
    assert np.all(np.isin(grid, traj.times))
    assert np.all(np.diff(traj.times) > 0.0)
