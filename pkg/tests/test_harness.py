import json
import math

import numpy as np
import pytest

import kirchsim as ks
from kirchsim import bounds as bnd, checks, cli
from kirchsim.config import ConfigError, parse_config
from kirchsim.experiments import run_age, run_lsc, run_verify


def _lsc_config(epsilons, nonlinearity=None, **solver):
    cfg = {
        "experiment": "lsc",
        "seed": 5,
        "spectrum": {"kind": "explicit", "values": [0.9, 1.7]},
        "nonlinearity": nonlinearity or {"family": "affine", "nu0": 1.0},
        "initial": {"u0": [0.2, -0.1], "u1": [0.05, 0.1]},
        "perturbation": {"d0": [0.3, -0.1], "d1": [0.1, 0.2],
                         "epsilons": epsilons},
        "solver": {"tol": 1e-9, "t_end": 5.0, "samples": 51, **solver},
    }
    return parse_config(cfg)


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config({"experiment": "verify",
                      "spectrum": {"kind": "string", "n": 2},
                      "nonlinearity": {"family": "affine", "nu0": 1.0},
                      "bogus": 1})


def test_unknown_nested_key_rejected():
    with pytest.raises(ConfigError, match="solver"):
        parse_config({"experiment": "verify",
                      "spectrum": {"kind": "string", "n": 2},
                      "nonlinearity": {"family": "affine", "nu0": 1.0},
                      "solver": {"tol": 1e-9, "dt": 0.1}})


def test_epsilon_grid_validated():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        _lsc_config([0.1, 0.2])
    with pytest.raises(ConfigError, match="lie in"):
        _lsc_config([1.5, 0.1])
    with pytest.raises(ConfigError, match="positive"):
        parse_config({**_lsc_config([0.1, 0.0]).raw, "experiment": "age"})


def test_experiment_tag_mismatch():
    data = {"experiment": "lsc", "spectrum": {"kind": "string", "n": 1},
            "nonlinearity": {"family": "affine", "nu0": 1.0}}
    with pytest.raises(ConfigError, match="tagged"):
        parse_config(data, experiment="age")


def test_perturbation_required_for_lsc():
    with pytest.raises(ConfigError, match="perturbation"):
        parse_config({"experiment": "lsc",
                      "spectrum": {"kind": "string", "n": 1},
                      "nonlinearity": {"family": "affine", "nu0": 1.0},
                      "initial": {"u0": [0.1], "u1": [0.0]}})


def test_run_lsc_zero_epsilon_row_is_exact():
    cfg = _lsc_config([0.25, 0.0])
    res = run_lsc(cfg)
    assert res.rows[-1]["epsilon"] == 0.0
    assert res.rows[-1]["sup_E_diff"] == 0.0
    assert res.rows[-1]["wp_ok"]


def test_run_lsc_constant_m_has_flat_bound():
    cfg = _lsc_config([0.125, 0.0625],
                      nonlinearity={"family": "constant", "nu0": 1.0})
    res = run_lsc(cfg)
    assert res.metadata["gamma2"] == 0.0
    # rate zero: the guaranteed time is unbounded
    assert all(row["guaranteed_time"] == math.inf for row in res.rows)
    assert res.verdicts["wp-regular-bound"]


def test_run_age_minimal_route():
    cfg = parse_config({
        "experiment": "age",
        "seed": 4,
        "spectrum": {"kind": "explicit", "values": [0.8, 1.4, 2.2, 3.0]},
        "nonlinearity": {"family": "affine", "nu0": 1.0},
        "initial": {"u0": [0.2, -0.1, 0.006, -0.003],
                    "u1": [0.08, 0.06, -0.005, 0.002]},
        "perturbation": {"d0": [0.3, -0.2, 0.015, 0.01],
                         "d1": [-0.1, 0.25, 0.005, -0.02],
                         "epsilons": [2.0**-k for k in range(6, 16)]},
        "solver": {"tol": 1e-9, "t_end": 16.0, "samples": 121},
        "age": {"case": "finite", "route": "minimal", "cutoff": 2.0,
                "sim_cap": 10.0, "max_horizon": 64.0},
    })
    res = run_age(cfg)
    assert res.metadata["route"] == "minimal"
    assert all(row["failed_hypotheses"] == "" for row in res.rows)
    assert res.verdicts["guaranteed-time-positive"]
    assert res.verdicts["claims-verified"]
    # a heavy high-frequency tail must be rejected by name
    heavy = parse_config({**cfg.raw, "initial": {"u0": [0.2, -0.1, 0.06, -0.3],
                                                 "u1": [0.08, 0.06, -0.05, 0.2]}})
    res2 = run_age(heavy)
    assert any("cutoff-condition" in row["failed_hypotheses"] for row in res2.rows)


def test_minimal_route_requires_cutoff():
    with pytest.raises(ConfigError, match="cutoff"):
        parse_config({"experiment": "age", "seed": 0,
                      "spectrum": {"kind": "string", "n": 2},
                      "nonlinearity": {"family": "affine", "nu0": 1.0},
                      "initial": {"u0": [0.1, 0.0], "u1": [0.0, 0.0]},
                      "perturbation": {"d0": [0.1, 0.0], "d1": [0.0, 0.1],
                                       "epsilons": [0.5, 0.25]},
                      "age": {"case": "finite", "route": "minimal"}})


def _age_envelope_config(case, weight, epsilons):
    k = [1.0, 2.0, 3.0, 4.0]
    return parse_config({
        "experiment": "age",
        "seed": 8,
        "spectrum": {"kind": "string", "n": 4},
        "nonlinearity": {"family": "affine", "nu0": 1.0},
        "weight": weight,
        "initial": {"u0": [0.2 * math.exp(-x) for x in k],
                    "u1": [0.1 * math.exp(-x) for x in k]},
        "perturbation": {"d0": [0.2, -0.1, 0.05, 0.02],
                         "d1": [-0.1, 0.15, 0.03, -0.04],
                         "epsilons": epsilons},
        "solver": {"tol": 1e-9, "t_end": 12.0, "samples": 121},
        "age": {"case": case, "sim_cap": 8.0, "max_horizon": 48.0},
    })


def test_run_age_analytic_case():
    eps = [0.5] + [2.0 ** -k for k in range(3, 10)]
    res = run_age(_age_envelope_config("analytic", {"family": "linear", "r0": 1.0}, eps))
    # the first size sits above the formula's positivity threshold (1/e)
    assert "epsilon-threshold" in res.rows[0]["failed_hypotheses"]
    ok = [r for r in res.rows[1:] if not r["failed_hypotheses"]]
    assert ok and res.verdicts["bound-nondecreasing"]
    rate = res.rows[1]["rate_constant"]
    assert rate == pytest.approx(12.0 * res.metadata["beta"])
    assert ok[0]["closed_form_bound"] == pytest.approx(
        math.log(abs(math.log(ok[0]["epsilon"]))) / rate)


def test_run_age_quasi_analytic_case():
    eps = [2.0 ** -k for k in range(6, 14)]
    res = run_age(_age_envelope_config("quasi_analytic",
                                       {"family": "quasi_analytic"}, eps))
    ok = [r for r in res.rows if not r["failed_hypotheses"]]
    assert ok and res.verdicts["bound-nondecreasing"]
    assert res.verdicts["claims-verified"]


def test_age_case_weight_consistency_enforced():
    with pytest.raises(ConfigError, match="analytic"):
        _age_envelope_config("analytic", {"family": "zero"}, [0.25, 0.125])


def test_calibration_rejects_zero_data():
    from kirchsim.comparison import calibrate_premise
    from kirchsim.model import Weight
    spec = ks.Spectrum(np.array([1.0]))
    nl = ks.Nonlinearity.affine(1.0)
    init = ks.State(t=0.0, u=np.zeros(1), v=np.zeros(1))
    traj = ks.evolve_kirchhoff(spec, nl, init, 1.0, 1e-9)
    with pytest.raises(ValueError, match="nonzero"):
        calibrate_premise(traj, nl, Weight.linear(1.0))


def test_verify_ledger_covers_all_checks():
    cfg = parse_config({"experiment": "verify", "seed": 1,
                        "spectrum": {"kind": "string", "n": 2},
                        "nonlinearity": {"family": "affine", "nu0": 1.0},
                        "verify": {"linear_cases": 2, "wp_cases": 1,
                                   "minimal_cases": 1, "interpolation_cases": 10,
                                   "envelope_draws": 2, "guaranteed_cases": 1,
                                   "tightness_cases": 2}})
    res = run_verify(cfg)
    assert [row["check"] for row in res.rows] == [
        "linear-energy-bound", "wp-regular-bound", "wp-minimal-bound",
        "interpolation-inequality", "double-exp-envelope",
        "triple-exp-envelope", "guaranteed-time-bound",
        "guaranteed-time-tightness"]


def test_constants_ledger_rows():
    from kirchsim.bounds import ConstantsBundle, constants_to_json, gammas, ledger_rows
    cb = ConstantsBundle(h0=0.5, nu0=1.0, r0=1.0, c0=2.0, l0=1.0, r1=1.0, r2=1.0)
    rows = ledger_rows(cb, gammas(cb))
    names = [r["name"] for r in rows]
    assert "H0" in names and "Gamma2" in names and "R2_lambda" not in names
    assert all(set(r) == {"name", "formula", "value"} for r in rows)
    json.loads(constants_to_json(cb, gammas(cb)))


def test_run_age_names_failed_hypotheses():
    cfg = parse_config({
        "experiment": "age",
        "seed": 2,
        "spectrum": {"kind": "explicit", "values": [1.0, 2.0]},
        "nonlinearity": {"family": "affine", "nu0": 1.0},
        "initial": {"u0": [0.2, -0.1], "u1": [0.1, 0.05]},
        "perturbation": {"d0": [2.0, 1.0], "d1": [1.0, 2.0],
                         "epsilons": [0.9, 0.001]},
        "solver": {"tol": 1e-9, "t_end": 10.0, "samples": 81},
        "age": {"case": "finite", "sim_cap": 5.0, "max_horizon": 20.0},
    })
    res = run_age(cfg)
    assert "reference-hamiltonian-doubling" in res.rows[0]["failed_hypotheses"]
    assert res.rows[1]["failed_hypotheses"] == ""
    assert res.metadata["operational_epsilon_threshold"] == 0.001


def test_constant_corruption_detected():
    # corrupted constants must trip the verification machinery: a halved
    # prefactor breaks the difference bound at its t = 0 anchor, and a
    # halved growth rate flips the guaranteed-time tightness verdict
    # (the measured separation rate sits far inside the worst-case rate,
    # so a rate corruption is only visible through the time inversion)
    spec = ks.Spectrum(np.array([0.8, 1.6, 2.4, 3.1]))
    nl = ks.Nonlinearity.affine(1.0)
    rng = np.random.default_rng(0)
    init = ks.State(t=0.0, u=0.25 * rng.standard_normal(4),
                    v=0.2 * rng.standard_normal(4))
    grid = np.linspace(0.0, 20.0, 161)
    base = ks.evolve_kirchhoff(spec, nl, init, 20.0, 1e-10, sample_times=grid)
    cb = bnd.build_constants(spec, nl, base)
    gs = bnd.gammas(cb, require="regular")
    assert gs.gamma1 < 1.9  # keeps the halved prefactor below the t=0 value
    d0, d1 = rng.standard_normal(4), rng.standard_normal(4)
    scale = 1.0 / math.sqrt(checks.pair_energy(spec, d0, d1))
    eps = 1e-3
    pert = ks.State(t=0.0, u=init.u + eps * scale * d0, v=init.v + eps * scale * d1)
    other = ks.evolve_kirchhoff(spec, nl, pert, 20.0, 1e-10, sample_times=grid)
    ib = np.searchsorted(base.times, grid)
    io_ = np.searchsorted(other.times, grid)
    e_w = checks._diff_energy(spec, base, other, ib, io_)

    good = np.log(e_w) - (math.log(gs.gamma1 * e_w[0]) + gs.gamma2 * grid)
    assert np.max(good) <= math.log1p(1e-3)
    bad_prefactor = np.log(e_w) - (math.log(0.5 * gs.gamma1 * e_w[0])
                                   + gs.gamma2 * grid)
    assert np.max(bad_prefactor) > math.log1p(1e-3)

    e0 = float(e_w[0])
    t_true = bnd.guaranteed_time(gs, e0, cb.r1)
    corrupted = bnd.GammaSet(gamma1=gs.gamma1, gamma2=0.5 * gs.gamma2,
                             gamma1_lambda=None, gamma2_lambda=None,
                             gamma3=gs.gamma3, gamma4=gs.gamma4)
    t_bad = bnd.guaranteed_time(corrupted, e0, cb.r1)
    assert t_bad == pytest.approx(2.0 * t_true, rel=1e-12)
    # the defining inequality with the true rate fails just inside the
    # corrupted time, so the tightness row catches the corruption
    smallness = math.log(gs.gamma1 * e0) + gs.gamma2 * 0.999 * t_bad
    assert smallness > 2.0 * math.log(cb.r1)


def test_run_growth_both_weight_families():
    from kirchsim.experiments import run_growth
    base = {
        "experiment": "growth",
        "seed": 6,
        "spectrum": {"kind": "string", "n": 4},
        "nonlinearity": {"family": "affine", "nu0": 1.0},
        "initial": {"u0": [0.2, 0.04, -0.01, 0.004],
                    "u1": [0.1, -0.03, 0.008, -0.002]},
        "solver": {"tol": 1e-10, "t_end": 10.0, "samples": 201},
        "growth": {"n_grid": 500, "supersolution_horizon": 2.0},
    }
    for weight in ({"family": "linear", "r0": 1.0}, {"family": "quasi_analytic"}):
        res = run_growth(parse_config({**base, "weight": weight}))
        assert res.all_pass(), res.verdicts
        assert list(res.rows[0].keys()) == ["t", "log_F", "log_envelope", "margin"]
        assert all(row["margin"] >= 0.0 for row in res.rows)


def test_verify_deterministic_in_process():
    cfg = parse_config({"experiment": "verify", "seed": 99,
                        "spectrum": {"kind": "string", "n": 2},
                        "nonlinearity": {"family": "affine", "nu0": 1.0},
                        "verify": {"linear_cases": 5, "wp_cases": 2,
                                   "minimal_cases": 1, "interpolation_cases": 50,
                                   "envelope_draws": 5, "guaranteed_cases": 1,
                                   "tightness_cases": 10}})
    a = run_verify(cfg)
    b = run_verify(cfg)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    assert a.all_pass()


def _write_verify_config(path, seed=123):
    data = {"experiment": "verify", "seed": seed,
            "spectrum": {"kind": "string", "n": 2},
            "nonlinearity": {"family": "affine", "nu0": 1.0},
            "verify": {"linear_cases": 4, "wp_cases": 2, "minimal_cases": 1,
                       "interpolation_cases": 40, "envelope_draws": 4,
                       "guaranteed_cases": 1, "tightness_cases": 5}}
    path.write_text(json.dumps(data))


def test_cli_verify_byte_identical_runs(tmp_path):
    cfg_path = tmp_path / "verify.json"
    _write_verify_config(cfg_path)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert (out1 / "verify.csv").read_bytes() == (out2 / "verify.csv").read_bytes()
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out1),
                     "--format", "json"]) == 0
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out2),
                     "--format", "json"]) == 0
    assert (out1 / "verify.json").read_bytes() == (out2 / "verify.json").read_bytes()


def test_cli_seed_override_changes_hash(tmp_path):
    cfg_path = tmp_path / "verify.json"
    _write_verify_config(cfg_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out1),
                     "--format", "json"]) == 0
    assert cli.main(["verify", "--config", str(cfg_path), "--out", str(out2),
                     "--seed", "321", "--format", "json"]) == 0
    j1 = json.loads((out1 / "verify.json").read_text())
    j2 = json.loads((out2 / "verify.json").read_text())
    assert j1["metadata"]["config_hash"] != j2["metadata"]["config_hash"]
    assert j1["metadata"]["seed"] == 123 and j2["metadata"]["seed"] == 321


def test_cli_bad_config_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"experiment": "verify", "bogus": 1}))
    assert cli.main(["verify", "--config", str(cfg_path), "--out",
                     str(tmp_path / "o")]) == 2


def test_cli_simulate_writes_trajectory(tmp_path):
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps({
        "experiment": "simulate", "seed": 0,
        "spectrum": {"kind": "string", "n": 2},
        "nonlinearity": {"family": "affine", "nu0": 1.0},
        "initial": {"u0": [0.2, 0.1], "u1": [0.0, 0.0]},
        "solver": {"tol": 1e-9, "t_end": 2.0, "samples": 21},
    }))
    out = tmp_path / "simout"
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "trajectory.csv").exists()
    assert (out / "simulate.csv").exists()
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out),
                     "--format", "json"]) == 0
    traj = ks.trajectory_from_json((out / "trajectory.json").read_text())
    assert len(traj) > 2
