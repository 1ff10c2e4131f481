"""Scenario configuration: strict JSON schema for the experiment runner.

Unknown keys are errors everywhere, so typos fail loudly instead of
silently running a default.  The full schema is documented in the README.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .model import Nonlinearity, Weight
from .spectral import Spectrum, lacunary_spectrum, sqrt_spectrum, string_spectrum

EXPERIMENTS = ("lsc", "age", "growth", "verify", "simulate")


def _take(d: dict, key: str, default=None, required: bool = False, ctx: str = ""):
    if key in d:
        return d.pop(key)
    if required:
        raise ConfigError(f"missing required key {key!r} in {ctx or 'config'}")
    return default


def _ensure_empty(d: dict, ctx: str):
    if d:
        raise ConfigError(f"unknown keys in {ctx}: {sorted(d)}")


def _vector(value, n: int, ctx: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ConfigError(f"{ctx} must be a list of {n} numbers")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{ctx} must be finite")
    return arr


def _spectrum(cfg, ctx="spectrum") -> Spectrum:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{ctx} must be an object")
    cfg = dict(cfg)
    kind = _take(cfg, "kind", required=True, ctx=ctx)
    if kind == "explicit":
        values = _take(cfg, "values", required=True, ctx=ctx)
        _ensure_empty(cfg, ctx)
        return Spectrum(np.asarray(values, dtype=float))
    n = _take(cfg, "n", required=True, ctx=ctx)
    _ensure_empty(cfg, ctx)
    if not (isinstance(n, int) and n > 0):
        raise ConfigError(f"{ctx}.n must be a positive integer")
    try:
        return {"string": string_spectrum, "sqrt": sqrt_spectrum,
                "lacunary": lacunary_spectrum}[kind](n)
    except KeyError:
        raise ConfigError(f"unknown spectrum kind {kind!r}") from None


def _nonlinearity(cfg, ctx="nonlinearity") -> Nonlinearity:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{ctx} must be an object")
    try:
        return Nonlinearity.from_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"{ctx}: {exc}") from None


def _weight(cfg, ctx="weight") -> Weight:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{ctx} must be an object")
    try:
        return Weight.from_config(cfg)
    except ValueError as exc:
        raise ConfigError(f"{ctx}: {exc}") from None


@dataclass
class SolverSettings:
    tol: float = 1e-10
    t_end: float = 20.0
    samples: int = 201
    escape_threshold: Optional[float] = None


@dataclass
class AgeSettings:
    case: str = "finite"
    route: str = "regular"
    cutoff: Optional[float] = None
    sim_cap: float = 50.0
    base_horizon: Optional[float] = None
    max_horizon: float = 200.0
    c2_ymax: float = 1e3


@dataclass
class GrowthSettings:
    n_grid: int = 1000
    c2_ymax: float = 1e3
    supersolution_horizon: float = 3.0


@dataclass
class VerifySettings:
    linear_cases: int = 50
    wp_cases: int = 10
    minimal_cases: int = 5
    interpolation_cases: int = 2000
    envelope_draws: int = 200
    guaranteed_cases: int = 5
    tightness_cases: int = 100


@dataclass
class LscSettings:
    final_threshold: float = 1e-6


@dataclass
class ScenarioConfig:
    """Parsed scenario: model, data, solver, and experiment settings."""

    experiment: str
    seed: int
    spectrum: Spectrum
    nonlinearity: Nonlinearity
    weight: Weight
    u0: np.ndarray
    u1: np.ndarray
    d0: Optional[np.ndarray]
    d1: Optional[np.ndarray]
    epsilons: Optional[np.ndarray]
    solver: SolverSettings
    age: AgeSettings
    growth: GrowthSettings
    verify: VerifySettings
    lsc: LscSettings
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def parse_config(data: dict, experiment: Optional[str] = None) -> ScenarioConfig:
    """Validate a configuration dict; raises ConfigError on any problem.

    ``experiment`` (typically the CLI subcommand) must agree with the
    config's own tag when both are present.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    raw = json.loads(json.dumps(data))  # normalized deep copy for hashing
    data = dict(data)

    tag = _take(data, "experiment", default=None)
    if tag is not None and tag not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {tag!r}")
    if experiment is not None and tag is not None and tag != experiment:
        raise ConfigError(f"config tagged {tag!r} but {experiment!r} requested")
    exp = experiment or tag
    if exp is None:
        raise ConfigError("no experiment given (config tag or CLI subcommand)")

    seed = _take(data, "seed", default=0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")

    spectrum = _spectrum(_take(data, "spectrum", required=True))
    nl = _nonlinearity(_take(data, "nonlinearity", required=True))
    weight = _weight(_take(data, "weight", default={"family": "zero"}))
    n = spectrum.n

    init = _take(data, "initial", required=exp != "verify",
                 default={"u0": [0.0] * n, "u1": [0.0] * n}, ctx="config")
    if not isinstance(init, dict):
        raise ConfigError("initial must be an object")
    init = dict(init)
    u0 = _vector(_take(init, "u0", required=True, ctx="initial"), n, "initial.u0")
    u1 = _vector(_take(init, "u1", required=True, ctx="initial"), n, "initial.u1")
    _ensure_empty(init, "initial")

    d0 = d1 = epsilons = None
    pert = _take(data, "perturbation", default=None)
    if pert is not None:
        if not isinstance(pert, dict):
            raise ConfigError("perturbation must be an object")
        pert = dict(pert)
        d0 = _vector(_take(pert, "d0", required=True, ctx="perturbation"), n, "perturbation.d0")
        d1 = _vector(_take(pert, "d1", required=True, ctx="perturbation"), n, "perturbation.d1")
        eps = np.asarray(_take(pert, "epsilons", required=True, ctx="perturbation"), dtype=float)
        _ensure_empty(pert, "perturbation")
        if eps.ndim != 1 or eps.size == 0:
            raise ConfigError("perturbation.epsilons must be a nonempty list")
        if np.any(eps < 0.0) or np.any(eps >= 1.0):
            raise ConfigError("perturbation sizes must lie in [0, 1)")
        if exp == "age" and np.any(eps == 0.0):
            raise ConfigError("age perturbation sizes must be positive")
        if np.any(np.diff(eps) >= 0.0):
            raise ConfigError("perturbation sizes must be strictly decreasing")
        epsilons = eps
    elif exp in ("lsc", "age"):
        raise ConfigError(f"experiment {exp!r} needs a perturbation section")

    solver_cfg = _take(data, "solver", default={})
    if not isinstance(solver_cfg, dict):
        raise ConfigError("solver must be an object")
    solver_cfg = dict(solver_cfg)
    solver = SolverSettings(
        tol=float(_take(solver_cfg, "tol", 1e-10)),
        t_end=float(_take(solver_cfg, "t_end", 20.0)),
        samples=int(_take(solver_cfg, "samples", 201)),
        escape_threshold=_take(solver_cfg, "escape_threshold", None),
    )
    _ensure_empty(solver_cfg, "solver")
    if solver.samples < 2:
        raise ConfigError("solver.samples must be at least 2")
    if solver.escape_threshold is not None:
        solver.escape_threshold = float(solver.escape_threshold)

    age_cfg = dict(_take(data, "age", default={}) or {})
    age = AgeSettings(
        case=_take(age_cfg, "case", "finite"),
        route=_take(age_cfg, "route", "regular"),
        cutoff=_take(age_cfg, "cutoff", None),
        sim_cap=float(_take(age_cfg, "sim_cap", 50.0)),
        base_horizon=_take(age_cfg, "base_horizon", None),
        max_horizon=float(_take(age_cfg, "max_horizon", 200.0)),
        c2_ymax=float(_take(age_cfg, "c2_ymax", 1e3)),
    )
    _ensure_empty(age_cfg, "age")
    if age.case not in ("finite", "analytic", "quasi_analytic", "null"):
        raise ConfigError(f"unknown age case {age.case!r}")
    if age.route not in ("regular", "minimal"):
        raise ConfigError(f"unknown age route {age.route!r}")
    if age.route == "minimal":
        if age.cutoff is None:
            raise ConfigError("age.route 'minimal' needs age.cutoff")
        age.cutoff = float(age.cutoff)
        if not age.cutoff > 0.0:
            raise ConfigError("age.cutoff must be positive")
    if age.base_horizon is not None:
        age.base_horizon = float(age.base_horizon)
    if exp == "age":
        if age.case == "analytic" and weight.family != "linear":
            raise ConfigError("age case 'analytic' needs the linear weight")
        if age.case == "quasi_analytic" and weight.family != "quasi_analytic":
            raise ConfigError("age case 'quasi_analytic' needs the quasi-analytic weight")

    growth_cfg = dict(_take(data, "growth", default={}) or {})
    growth = GrowthSettings(
        n_grid=int(_take(growth_cfg, "n_grid", 1000)),
        c2_ymax=float(_take(growth_cfg, "c2_ymax", 1e3)),
        supersolution_horizon=float(_take(growth_cfg, "supersolution_horizon", 3.0)),
    )
    _ensure_empty(growth_cfg, "growth")

    verify_cfg = dict(_take(data, "verify", default={}) or {})
    verify = VerifySettings(
        linear_cases=int(_take(verify_cfg, "linear_cases", 50)),
        wp_cases=int(_take(verify_cfg, "wp_cases", 10)),
        minimal_cases=int(_take(verify_cfg, "minimal_cases", 5)),
        interpolation_cases=int(_take(verify_cfg, "interpolation_cases", 2000)),
        envelope_draws=int(_take(verify_cfg, "envelope_draws", 200)),
        guaranteed_cases=int(_take(verify_cfg, "guaranteed_cases", 5)),
        tightness_cases=int(_take(verify_cfg, "tightness_cases", 100)),
    )
    _ensure_empty(verify_cfg, "verify")

    lsc_cfg = dict(_take(data, "lsc", default={}) or {})
    lsc = LscSettings(final_threshold=float(_take(lsc_cfg, "final_threshold", 1e-6)))
    _ensure_empty(lsc_cfg, "lsc")

    _ensure_empty(data, "config")
    return ScenarioConfig(experiment=exp, seed=seed, spectrum=spectrum,
                          nonlinearity=nl, weight=weight, u0=u0, u1=u1,
                          d0=d0, d1=d1, epsilons=epsilons, solver=solver,
                          age=age, growth=growth, verify=verify, lsc=lsc, raw=raw)


def load_config(path: str, experiment: Optional[str] = None,
                overrides: Optional[dict] = None) -> ScenarioConfig:
    """Load a JSON config file, applying CLI overrides before validation."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if overrides:
        if "seed" in overrides and overrides["seed"] is not None:
            data["seed"] = overrides["seed"]
        if "tol" in overrides and overrides["tol"] is not None:
            data.setdefault("solver", {})
            data["solver"]["tol"] = overrides["tol"]
    return parse_config(data, experiment=experiment)
