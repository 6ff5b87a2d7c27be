"""TOML scenario files: schema, loading, strict validation.

A scenario file describes one complete setup in nested tables:

    [scenario]
    name = "smooth-default"

    [detectors]
    positions = [[1.48, 0.26], [-0.34, 1.46], ...]   # K rows of [x, y]
    nu = 1.0                                          # optional, speed > 0

    [box]
    lower = [-0.8, -0.45, 0.1, -0.35]
    upper = [-0.1, 0.35, 0.8, 0.45]

    [truth]
    theta0 = [-0.45, 0.14, 0.42, -0.08]

    [model]
    kappa = 1.0
    delta = 0.25
    lambda0 = 0.5
    horizon = 2.75
    n = 1000.0
    amplitude = 2.0            # scalar, or amplitudes = 2 x K table
    # slopes = [[...], [...]]  # optional affine amplitude drift
    # smooth_override = true   # optional front-shape switch

    [experiment]               # needed by experiment subcommands only
    n_ladder = [200, 500, 1500, 4000, 10000]
    replications = 200
    master_seed = 0            # optional
    estimator = "mle"          # optional, "mle" or "be"
    workers = 1                # optional

    [estimator]                # optional keyword knobs passed through
    lattice = 4
    refine_starts = 2

    [limits]                   # optional limit-sampler knobs
    count = 300
    law = "auto"               # or "zeta" | "xi" | "eta"
    resolution = 17            # optional GridSpec overrides
    # half_width, v_half_width, step

Unknown tables or keys are rejected so typos fail loudly; every
validation error names the offending [table] key.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import tomli

from .errors import ConfigError, DomainError
from .experiments import ExperimentConfig
from .geometry import DetectorArray, ParameterBox, as_theta_array
from .limits import GridSpec
from .signal import FrontSpec, IntensityModel

__all__ = ["ScenarioConfig", "load_config", "parse_config", "experiment_config"]

_MLE_OPTIONS = {"lattice", "refine_starts", "nm_restarts", "max_iter"}
_BE_OPTIONS = {"draws", "lattice", "refine_starts", "scale_mult",
               "resid_frac", "min_ess", "max_attempts"}
_LIMITS_KEYS = {"count", "law", "resolution", "half_width", "v_half_width",
                "step"}
_TOP_TABLES = {"scenario", "detectors", "box", "truth", "model",
               "experiment", "estimator", "limits"}


@dataclass(frozen=True)
class ScenarioConfig:
    """A parsed and validated scenario file."""

    name: str
    array: DetectorArray
    box: ParameterBox
    theta0: np.ndarray
    model: IntensityModel
    experiment: dict | None
    estimator_options: dict = field(default_factory=dict)
    limits_options: dict = field(default_factory=dict)
    text: str = ""

    def grid_spec(self) -> GridSpec | None:
        """GridSpec from the [limits] overrides, None when untouched."""
        keys = ("half_width", "resolution", "v_half_width", "step")
        given = {k: self.limits_options[k] for k in keys
                 if k in self.limits_options}
        if not given:
            return None
        return GridSpec(**given)


def _fail(where: str, key: str, why: str):
    raise ConfigError(f"[{where}] {key} {why}")


def _get(table: dict, where: str, key: str, kinds, *, required: bool = True,
         default=None):
    if key not in table:
        if required:
            raise ConfigError(f"missing [{where}] {key}")
        return default
    value = table[key]
    # bool passes isinstance(int) in Python; numeric fields must reject it
    if kinds is not bool and isinstance(value, bool):
        _fail(where, key, "must not be a boolean")
    if not isinstance(value, kinds):
        _fail(where, key, f"has the wrong type {type(value).__name__}")
    return value


def _number_list(table: dict, where: str, key: str, length: int | None = None,
                 *, required: bool = True):
    value = _get(table, where, key, list, required=required)
    if value is None:
        return None
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
               for v in value):
        _fail(where, key, "must be a list of numbers")
    if length is not None and len(value) != length:
        _fail(where, key, f"must have {length} entries, got {len(value)}")
    return [float(v) for v in value]


def _matrix(table: dict, where: str, key: str, *, required: bool = True):
    value = _get(table, where, key, list, required=required)
    if value is None:
        return None
    if not value or not all(isinstance(r, list) for r in value):
        _fail(where, key, "must be a list of rows")
    width = len(value[0])
    rows = []
    for r in value:
        if len(r) != width:
            _fail(where, key, "rows must all have the same length")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                   for v in r):
            _fail(where, key, "must contain only numbers")
        rows.append([float(v) for v in r])
    return np.array(rows)


def _check_known_keys(table: dict, where: str, allowed) -> None:
    unknown = set(table) - set(allowed)
    if unknown:
        _fail(where, sorted(unknown)[0], "is not a recognized key")


def parse_config(text: str) -> ScenarioConfig:
    """Parse scenario TOML text; ConfigError names every bad field."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"config is not valid TOML: {err}") from err

    unknown = set(raw) - _TOP_TABLES
    if unknown:
        raise ConfigError(f"unknown table [{sorted(unknown)[0]}]")
    for name in ("scenario", "detectors", "box", "truth", "model"):
        if name not in raw:
            raise ConfigError(f"missing table [{name}]")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"[{name}] must be a table")

    _check_known_keys(raw["scenario"], "scenario", {"name"})
    name = _get(raw["scenario"], "scenario", "name", str)
    if not name:
        _fail("scenario", "name", "must be non-empty")

    _check_known_keys(raw["detectors"], "detectors", {"positions", "nu"})
    positions = _matrix(raw["detectors"], "detectors", "positions")
    if positions.shape[1] != 2:
        _fail("detectors", "positions", "rows must be [x, y] pairs")
    nu = _get(raw["detectors"], "detectors", "nu", (int, float),
              required=False, default=1.0)
    try:
        array = DetectorArray(positions, nu=float(nu))
    except DomainError as err:
        raise ConfigError(f"[detectors] {err}") from err

    _check_known_keys(raw["box"], "box", {"lower", "upper"})
    lower = _number_list(raw["box"], "box", "lower", 4)
    upper = _number_list(raw["box"], "box", "upper", 4)
    try:
        box = ParameterBox(lower, upper)
    except DomainError as err:
        raise ConfigError(f"[box] {err}") from err

    _check_known_keys(raw["truth"], "truth", {"theta0"})
    theta0 = as_theta_array(_number_list(raw["truth"], "truth", "theta0", 4))

    model = _parse_model(raw["model"], array.size)
    experiment = _parse_experiment(raw.get("experiment"))
    estimator_options = _parse_estimator(raw.get("estimator"))
    limits_options = _parse_limits(raw.get("limits"))

    return ScenarioConfig(name=name, array=array, box=box, theta0=theta0,
                          model=model, experiment=experiment,
                          estimator_options=estimator_options,
                          limits_options=limits_options, text=text)


def _parse_model(table: dict, n_detectors: int) -> IntensityModel:
    allowed = {"kappa", "delta", "lambda0", "horizon", "n", "amplitude",
               "amplitudes", "slopes", "smooth_override"}
    _check_known_keys(table, "model", allowed)
    kappa = float(_get(table, "model", "kappa", (int, float)))
    delta = float(_get(table, "model", "delta", (int, float)))
    lambda0 = float(_get(table, "model", "lambda0", (int, float)))
    horizon = float(_get(table, "model", "horizon", (int, float)))
    n = float(_get(table, "model", "n", (int, float), required=False,
                   default=1000.0))
    override = _get(table, "model", "smooth_override", bool, required=False)

    if "amplitude" in table and "amplitudes" in table:
        _fail("model", "amplitude", "and amplitudes are mutually exclusive")
    if "amplitudes" in table:
        amps = _matrix(table, "model", "amplitudes")
    elif "amplitude" in table:
        scalar = float(_get(table, "model", "amplitude", (int, float)))
        amps = np.full((2, n_detectors), scalar)
    else:
        raise ConfigError("missing [model] amplitude (or amplitudes)")
    slopes = _matrix(table, "model", "slopes", required=False)

    try:
        front = FrontSpec(kappa=kappa, delta=delta, smooth_override=override)
        return IntensityModel(front, amps, lambda0, n, horizon, slopes=slopes)
    except DomainError as err:
        raise ConfigError(f"[model] {err}") from err


def _parse_experiment(table: dict | None) -> dict | None:
    if table is None:
        return None
    if not isinstance(table, dict):
        raise ConfigError("[experiment] must be a table")
    allowed = {"n_ladder", "replications", "master_seed", "estimator",
               "workers"}
    _check_known_keys(table, "experiment", allowed)
    ladder = _number_list(table, "experiment", "n_ladder")
    replications = _get(table, "experiment", "replications", int)
    seed = _get(table, "experiment", "master_seed", int, required=False,
                default=0)
    if seed < 0:
        _fail("experiment", "master_seed", "must be >= 0")
    estimator = _get(table, "experiment", "estimator", str, required=False,
                     default="mle")
    workers = _get(table, "experiment", "workers", int, required=False,
                   default=1)
    return {"n_ladder": tuple(ladder), "replications": replications,
            "master_seed": seed, "estimator": estimator, "workers": workers}


def _parse_estimator(table: dict | None) -> dict:
    if table is None:
        return {}
    if not isinstance(table, dict):
        raise ConfigError("[estimator] must be a table")
    _check_known_keys(table, "estimator", _MLE_OPTIONS | _BE_OPTIONS)
    out = {}
    for key, value in table.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail("estimator", key, "must be a number")
        out[key] = value
    return out


def _parse_limits(table: dict | None) -> dict:
    if table is None:
        return {}
    if not isinstance(table, dict):
        raise ConfigError("[limits] must be a table")
    _check_known_keys(table, "limits", _LIMITS_KEYS)
    out = {}
    if "count" in table:
        count = _get(table, "limits", "count", int)
        if count < 1:
            _fail("limits", "count", "must be >= 1")
        out["count"] = count
    if "law" in table:
        law = _get(table, "limits", "law", str)
        if law not in ("auto", "zeta", "xi", "eta"):
            _fail("limits", "law", f"must be auto/zeta/xi/eta, got {law!r}")
        out["law"] = law
    if "resolution" in table:
        out["resolution"] = _get(table, "limits", "resolution", int)
    for key in ("half_width", "v_half_width", "step"):
        if key in table:
            out[key] = float(_get(table, "limits", key, (int, float)))
    return out


def load_config(path) -> ScenarioConfig:
    """Read and parse a scenario file; ConfigError on any problem."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def experiment_config(cfg: ScenarioConfig, *, workers: int | None = None,
                      master_seed: int | None = None,
                      out_dir: str | None = None,
                      force: bool = False) -> ExperimentConfig:
    """Build the harness config, with CLI-level overrides applied on top."""
    if cfg.experiment is None:
        raise ConfigError("missing table [experiment]")
    exp = dict(cfg.experiment)
    if workers is not None:
        exp["workers"] = workers
    if master_seed is not None:
        exp["master_seed"] = master_seed
    return ExperimentConfig(
        scenario=cfg.name, array=cfg.array, box=cfg.box, theta0=cfg.theta0,
        model=cfg.model, n_ladder=exp["n_ladder"],
        replications=exp["replications"], master_seed=exp["master_seed"],
        estimator=exp["estimator"],
        estimator_options=dict(cfg.estimator_options),
        workers=exp["workers"], out_dir=out_dir, force=force)
