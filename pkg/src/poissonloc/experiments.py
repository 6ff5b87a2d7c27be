"""Monte Carlo harness: replication loops, rate regression, law checks.

Four entry points:

* ``identifiability_screen`` classifies a detector layout before any
  simulation is attempted.
* ``run_rate_experiment`` runs simulate -> estimate over an n ladder and
  regresses ln RMSE on ln n against the regime's theoretical slope.
* ``normality_check`` compares the covariance of root-n errors with the
  inverse information matrix in the smooth regime.
* ``limit_law_check`` compares rescaled estimator errors with draws from
  the cusp or change-point limit samplers via an energy-distance
  permutation test.

Replications are embarrassingly parallel. Every replication draws its
seeds from the master seed and its (rung, replication) index, so output
is byte-identical for any worker count.

Emitted files (column order is fixed):

* ``results.csv``: scenario,regime,n,rep,th1,th2,th3,th4,error
* ``rates.json``: the RateReport fields
* ``normality.json``: the normality_check report
* ``limits.csv``: kind,draw,u1,u2,u3,u4 where kind is rescaled_error,
  sampler_draw, or control_error
"""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DomainError, IdentifiabilityError, RegimeError
from .estimate import bayes_estimate, mle
from .geometry import (CrossWitness, DetectorArray, ParameterBox,
                       as_theta_array, confusable_pair, lies_on_cross)
from .likelihood import fisher_information
from .limits import EtaSampler, GridSpec, XiSampler
from .seeds import derive_seed, substream
from .signal import Regime, IntensityModel
from .simulate import simulate

__all__ = [
    "ExperimentConfig",
    "RateReport",
    "ScreenVerdict",
    "energy_distance",
    "energy_permutation_test",
    "identifiability_screen",
    "limit_law_check",
    "normality_check",
    "run_rate_experiment",
]

_RESULTS_HEADER = "scenario,regime,n,rep,th1,th2,th3,th4,error"
_LIMITS_HEADER = "kind,draw,u1,u2,u3,u4"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a replication loop needs, validated up front.

    The model acts as a template: its n is replaced by each ladder rung.
    estimator is "mle" (maximum likelihood) or "be" (posterior mean);
    estimator_options are passed through to the chosen estimator. With
    force=True the identifiability screen is skipped, which is only
    useful to demonstrate what goes wrong on a degenerate layout.
    """

    scenario: str
    array: DetectorArray
    box: ParameterBox
    theta0: object
    model: IntensityModel
    n_ladder: tuple
    replications: int
    master_seed: int = 0
    estimator: str = "mle"
    estimator_options: dict = field(default_factory=dict)
    workers: int = 1
    out_dir: str | None = None
    force: bool = False

    def __post_init__(self):
        theta0 = as_theta_array(self.theta0)
        object.__setattr__(self, "theta0", theta0)
        if not (np.all(theta0 > self.box.lower) and np.all(theta0 < self.box.upper)):
            raise ConfigError("theta0 must lie strictly inside the box")
        ladder = tuple(float(v) for v in self.n_ladder)
        if len(ladder) < 4:
            raise ConfigError(f"n_ladder needs at least 4 rungs, got {len(ladder)}")
        if not all(np.isfinite(v) and v > 0.0 for v in ladder):
            raise ConfigError("n_ladder values must be positive and finite")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("n_ladder must be strictly increasing")
        object.__setattr__(self, "n_ladder", ladder)
        if int(self.replications) < 50:
            raise ConfigError(
                f"replications must be at least 50, got {self.replications}")
        object.__setattr__(self, "replications", int(self.replications))
        if self.estimator not in ("mle", "be"):
            raise ConfigError(
                f"estimator must be 'mle' or 'be', got {self.estimator!r}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "workers", int(self.workers))
        if self.model.n_detectors != self.array.size:
            raise ConfigError(
                f"model covers {self.model.n_detectors} detectors, "
                f"array has {self.array.size}")

    @property
    def regime_name(self) -> str:
        return self.model.regime.name.lower()

    def swap_symmetric(self) -> bool:
        """True when the two sources' amplitude profiles are identical.

        Only then is the source labeling ambiguous and the estimation
        error minimized over the two labelings.
        """
        amps = self.model.amplitudes
        if not np.array_equal(amps[0], amps[1]):
            return False
        return self.model.slopes is None or np.array_equal(
            self.model.slopes[0], self.model.slopes[1])


@dataclass(frozen=True)
class RateReport:
    """Fitted convergence rate over an n ladder.

    slope is the OLS coefficient of ln RMSE on ln n and stays a finite
    number even when no rate exists; in that case shrinking is False,
    passed is False and note says why, so a flat error curve is never
    dressed up as a rate.
    """

    scenario: str
    regime: str
    n_values: tuple
    rmse: tuple
    slope: float
    slope_se: float
    target: float
    tolerance: float
    passed: bool
    shrinking: bool
    note: str = ""
    warnings: tuple = ()

    def __post_init__(self):
        if not all(np.isfinite(r) and r > 0.0 for r in self.rmse):
            raise DomainError("every per-n RMSE must be positive and finite")
        if not (np.isfinite(self.slope) and np.isfinite(self.slope_se)):
            raise DomainError("fitted slope and its standard error must be finite")


@dataclass(frozen=True)
class ScreenVerdict:
    """Outcome of the detector-layout identifiability screen."""

    kind: str  # "identifiable" | "cross" | "too-few"
    witness: CrossWitness | None = None
    confusable: tuple | None = None
    note: str = ""

    @property
    def identifiable(self) -> bool:
        return self.kind == "identifiable"


def identifiability_screen(array: DetectorArray,
                           box: ParameterBox | None = None) -> ScreenVerdict:
    """Classify a detector layout: can it separate two sources at all?

    Layouts with K <= 3 detectors are reported "too-few". Layouts whose
    detectors all sit on two lines are reported "cross" with the witness
    lines and, when a box is given and admits one, a demonstration pair
    of parameter points inside the box that the layout cannot tell
    apart. Everything else is "identifiable".
    """
    witness = lies_on_cross(array.positions)
    if array.size <= 3:
        return ScreenVerdict(
            "too-few", witness=witness,
            note=f"{array.size} detectors cannot separate two sources; "
                 "at least 4 are necessary")
    if witness is not None:
        pair = confusable_pair(array, box, witness=witness)
        return ScreenVerdict("cross", witness=witness, confusable=pair,
                             note=witness.describe())
    note = ""
    if array.size == 4:
        note = ("4 detectors is the minimum; identifiability holds only "
                "while they stay off every pair of covering lines")
    return ScreenVerdict("identifiable", note=note)


def _require_identifiable(config: ExperimentConfig) -> None:
    if config.force:
        return
    verdict = identifiability_screen(config.array, config.box)
    if not verdict.identifiable:
        raise IdentifiabilityError(
            f"detector layout fails the identifiability screen "
            f"({verdict.kind}): {verdict.note}", witness=verdict.witness)


def _run_one(config: ExperimentConfig, j: int, rep: int):
    """One replication at ladder rung j; returns (j, rep, theta_hat, warnings)."""
    n = config.n_ladder[j]
    model = config.model.with_n(n)
    sim_seed = derive_seed(config.master_seed, j, rep)
    obs = simulate(model, config.array, config.theta0, seed=sim_seed)
    if config.estimator == "be":
        est_seed = derive_seed(config.master_seed, j, rep, 1)
        result = bayes_estimate(obs, config.box, seed=est_seed,
                                **config.estimator_options)
    else:
        result = mle(obs, config.box, **config.estimator_options)
    return j, rep, result.values, tuple(result.warnings)


def _run_task(task):
    return _run_one(*task)


def _run_grid(config: ExperimentConfig, rungs) -> list:
    """All (rung, rep) replications in a fixed order for any worker count."""
    tasks = [(config, j, rep) for j in rungs for rep in range(config.replications)]
    if config.workers > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (4 * config.workers))
        with multiprocessing.Pool(config.workers) as pool:
            out = pool.map(_run_task, tasks, chunksize=chunk)
    else:
        out = [_run_task(t) for t in tasks]
    out.sort(key=lambda r: (r[0], r[1]))
    return out


def _error_vector(theta_hat: np.ndarray, theta0: np.ndarray,
                  swap: bool) -> np.ndarray:
    diff = theta_hat - theta0
    if not swap:
        return diff
    alt = np.concatenate([theta_hat[2:], theta_hat[:2]]) - theta0
    return alt if float(alt @ alt) < float(diff @ diff) else diff


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of y on x and its standard error (df = len - 2)."""
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    return float(coef[1]), float(np.sqrt(s2 / sxx))


def _slope_target(model: IntensityModel) -> tuple[float, float]:
    # tolerances are harness constants from pilot run variance at M=200
    regime = model.regime
    if regime is Regime.SMOOTH:
        return -0.5, 0.1
    if regime is Regime.CUSP:
        return -1.0 / (2.0 * model.front.kappa + 1.0), 0.1
    return -1.0, 0.15


def run_rate_experiment(config: ExperimentConfig) -> RateReport:
    """Estimate the convergence rate of the configured estimator.

    For each rung of the n ladder, runs M independent simulate ->
    estimate replications, forms the RMSE of the (labeling-minimized,
    see ExperimentConfig.swap_symmetric) estimation error, and fits an
    ordinary least-squares line to (ln n, ln RMSE). The fitted slope is
    compared to the regime target: -1/2 smooth, -1/(2 kappa + 1) cusp,
    -1 change point.

    Refuses layouts that fail the identifiability screen unless
    config.force is set; the refusal carries the cross witness. With
    out_dir set, writes results.csv and rates.json.
    """
    _require_identifiable(config)
    swap = config.swap_symmetric()
    results = _run_grid(config, range(len(config.n_ladder)))
    errors = np.zeros((len(config.n_ladder), config.replications))
    rows = []
    warnings: list[str] = []
    for j, rep, values, warns in results:
        err = float(np.linalg.norm(_error_vector(values, config.theta0, swap)))
        errors[j, rep] = err
        rows.append((config.scenario, config.regime_name,
                     config.n_ladder[j], rep, values, err))
        for w in warns:
            if len(warnings) < 25:
                warnings.append(f"n={config.n_ladder[j]:g} rep={rep}: {w}")
    rmse = np.sqrt(np.mean(errors ** 2, axis=1))
    slope, slope_se = _ols_slope(np.log(np.asarray(config.n_ladder)), np.log(rmse))
    target, tolerance = _slope_target(config.model)
    shrinking = bool(rmse[-1] < 0.8 * rmse[0])
    note = ""
    if not shrinking:
        note = ("rate undefined: RMSE does not shrink across the ladder "
                f"(first {rmse[0]:.3g}, last {rmse[-1]:.3g})")
    report = RateReport(
        scenario=config.scenario, regime=config.regime_name,
        n_values=config.n_ladder, rmse=tuple(float(r) for r in rmse),
        slope=slope, slope_se=slope_se, target=target, tolerance=tolerance,
        passed=bool(shrinking and abs(slope - target) <= tolerance),
        shrinking=shrinking, note=note, warnings=tuple(warnings))
    if config.out_dir is not None:
        _write_results_csv(os.path.join(config.out_dir, "results.csv"), rows)
        _write_json(os.path.join(config.out_dir, "rates.json"), asdict(report))
    return report


def normality_check(config: ExperimentConfig) -> dict:
    """Gaussian-limit diagnostics at the largest ladder rung (smooth only).

    Runs M replications at the top n, rescales the errors by sqrt(n) and
    reports: the relative Frobenius distance between their covariance
    and the inverse information matrix, the risk ratio
    n E||theta_hat - theta0||^2 / trace(I^{-1}), and per-axis skewness
    and excess-kurtosis z-scores (null sd sqrt(6/M) and sqrt(24/M)).
    With out_dir set, writes normality.json.
    """
    if config.model.regime is not Regime.SMOOTH:
        raise RegimeError(
            f"normality check needs the smooth regime, got {config.regime_name}")
    _require_identifiable(config)
    swap = config.swap_symmetric()
    j = len(config.n_ladder) - 1
    n = config.n_ladder[j]
    results = _run_grid(config, [j])
    vecs = np.array([_error_vector(v, config.theta0, swap)
                     for _, _, v, _ in results])
    m = config.replications
    scaled = np.sqrt(n) * vecs
    inv = fisher_information(config.model, config.array, config.theta0).inverse()
    cov = np.cov(scaled, rowvar=False)
    centered = scaled - scaled.mean(axis=0)
    z = centered / scaled.std(axis=0)
    report = {
        "scenario": config.scenario,
        "regime": config.regime_name,
        "n": n,
        "replications": m,
        "cov_rel_frobenius": float(np.linalg.norm(cov - inv) / np.linalg.norm(inv)),
        "risk_ratio": float(n * np.mean(np.sum(vecs ** 2, axis=1)) / np.trace(inv)),
        "trace_inverse": float(np.trace(inv)),
        "skew_z": [float(v) for v in np.mean(z ** 3, axis=0) / np.sqrt(6.0 / m)],
        "kurt_z": [float(v) for v in
                   (np.mean(z ** 4, axis=0) - 3.0) / np.sqrt(24.0 / m)],
    }
    if config.out_dir is not None:
        _write_json(os.path.join(config.out_dir, "normality.json"), report)
    return report


def limit_law_check(config: ExperimentConfig, *,
                    sampler_count: int | None = None,
                    permutations: int = 499,
                    control: bool = False,
                    grid_spec: GridSpec | None = None) -> dict:
    """Two-sample check of rescaled estimator errors against the limit law.

    At the largest ladder rung the M estimation errors are rescaled by
    n^{1/(2 kappa + 1)} (cusp) or n (change point) and compared with
    draws from the matching limit sampler using the energy-distance
    permutation test; energy distance is used because the law is
    4-dimensional. With control=True the same errors are also rescaled
    by sqrt(n), a deliberately wrong rate that the test must reject.
    With out_dir set, writes limits.csv.
    """
    regime = config.model.regime
    if regime is Regime.SMOOTH:
        raise RegimeError(
            "limit-law check covers the cusp and change-point regimes")
    _require_identifiable(config)
    swap = config.swap_symmetric()
    j = len(config.n_ladder) - 1
    n = config.n_ladder[j]
    results = _run_grid(config, [j])
    vecs = np.array([_error_vector(v, config.theta0, swap)
                     for _, _, v, _ in results])
    sampler_seed = derive_seed(config.master_seed, len(config.n_ladder), 0)
    if regime is Regime.CUSP:
        rate = float(n ** (1.0 / (2.0 * config.model.front.kappa + 1.0)))
        sampler = XiSampler(config.theta0, config.array, config.model,
                            grid_spec=grid_spec, seed=sampler_seed)
    else:
        rate = float(n)
        sampler = EtaSampler(config.theta0, config.array, config.model,
                             grid_spec=grid_spec, seed=sampler_seed)
    count = config.replications if sampler_count is None else int(sampler_count)
    draws = sampler.sample(count).draws
    scaled = rate * vecs
    stat, p = energy_permutation_test(
        scaled, draws, permutations=permutations,
        seed=derive_seed(config.master_seed, len(config.n_ladder), 1))
    report = {
        "scenario": config.scenario,
        "regime": config.regime_name,
        "n": n,
        "replications": config.replications,
        "sampler_count": count,
        "rescaling": rate,
        "energy_distance": stat,
        "p_value": p,
        "permutations": permutations,
    }
    blocks = [("rescaled_error", scaled), ("sampler_draw", draws)]
    if control:
        wrong = np.sqrt(n) * vecs
        cstat, cp = energy_permutation_test(
            wrong, draws, permutations=permutations,
            seed=derive_seed(config.master_seed, len(config.n_ladder), 2))
        report["control_rescaling"] = float(np.sqrt(n))
        report["control_energy_distance"] = cstat
        report["control_p_value"] = cp
        blocks.append(("control_error", wrong))
    if config.out_dir is not None:
        _write_limits_csv(os.path.join(config.out_dir, "limits.csv"), blocks)
    return report


def energy_distance(x, y) -> float:
    """Energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'| between two samples.

    V-statistic form: all means run over every ordered pair including
    the zero diagonal. Nonnegative, and zero iff the empirical laws
    coincide.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return float(2.0 * cdist(x, y).mean() - cdist(x, x).mean()
                 - cdist(y, y).mean())


def energy_permutation_test(x, y, *, permutations: int = 499,
                            seed: int = 0) -> tuple[float, float]:
    """Permutation p-value for "x and y are drawn from the same law".

    Returns (observed energy distance, p). The pooled distance matrix is
    computed once and every permuted statistic reuses it through a single
    matrix product, so hundreds of permutations of 300+300 points stay
    cheap. p = (1 + #{permuted >= observed}) / (permutations + 1); ties
    count toward the null.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise DomainError("permutation test needs at least 2 points per sample")
    if int(permutations) < 1:
        raise DomainError(f"permutations must be >= 1, got {permutations}")
    pool = np.vstack([x, y])
    dist = cdist(pool, pool)
    total = float(dist.sum())

    def stat(sxx: float, syy: float) -> float:
        sxy = 0.5 * (total - sxx - syy)
        return 2.0 * sxy / (nx * ny) - sxx / nx ** 2 - syy / ny ** 2

    mask0 = np.zeros(nx + ny)
    mask0[:nx] = 1.0
    obs = stat(float(mask0 @ dist @ mask0),
               float((1.0 - mask0) @ dist @ (1.0 - mask0)))
    rng = substream(seed)
    masks = np.zeros((nx + ny, int(permutations)))
    for r in range(int(permutations)):
        masks[rng.permutation(nx + ny)[:nx], r] = 1.0
    prod = dist @ masks
    sxx = np.einsum("nr,nr->r", masks, prod)
    syy = total - 2.0 * prod.sum(axis=0) + sxx
    sxy = 0.5 * (total - sxx - syy)
    stats = 2.0 * sxy / (nx * ny) - sxx / nx ** 2 - syy / ny ** 2
    p = (1.0 + int(np.count_nonzero(stats >= obs - 1e-12))) / (permutations + 1.0)
    return float(obs), float(p)


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _write_json(path: str, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _write_results_csv(path: str, rows) -> None:
    lines = [_RESULTS_HEADER]
    for scenario, regime, n, rep, values, err in rows:
        theta = ",".join(repr(float(v)) for v in values)
        lines.append(f"{scenario},{regime},{n:g},{rep},{theta},{err!r}")
    _write_text(path, "\n".join(lines) + "\n")


def _write_limits_csv(path: str, blocks) -> None:
    lines = [_LIMITS_HEADER]
    for kind, points in blocks:
        for i, row in enumerate(np.atleast_2d(points)):
            coords = ",".join(repr(float(v)) for v in row)
            lines.append(f"{kind},{i},{coords}")
    _write_text(path, "\n".join(lines) + "\n")
