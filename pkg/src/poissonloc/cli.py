"""Command-line entry point.

Subcommands: simulate | estimate | experiment | identify | limits.
Every run reads one TOML scenario file (schema in config.py) and writes
a manifest.json recording the config hash, seed, version, stage timings
and output files next to its outputs.

Exit codes are stable: 0 ok, 2 config problem, 3 data problem,
4 identifiability refusal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .config import (_BE_OPTIONS, _MLE_OPTIONS, ScenarioConfig,
                     experiment_config, load_config)
from .errors import (ConfigError, DataError, DomainError, IdentifiabilityError,
                     RegimeError, SingularFisherError)
from .estimate import EstimateResult, bayes_estimate, mle
from .experiments import (identifiability_screen, limit_law_check,
                          normality_check, run_rate_experiment)
from .likelihood import fisher_information
from .limits import sample_eta, sample_xi, sample_zeta, write_draws_csv
from .signal import Regime, validate_scenario
from .simulate import read_jsonl, simulate, write_jsonl

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IDENTIFIABILITY = 4


@dataclass(frozen=True)
class RunManifest:
    """What a run consumed and produced, for replay bookkeeping.

    config_sha256 hashes the exact config text, so it is identical on
    any platform for identical file contents.
    """

    config_sha256: str
    master_seed: int | None
    version: str
    timings: dict
    outputs: tuple

    @classmethod
    def build(cls, config_text: str, seed: int | None, timings: dict,
              outputs) -> "RunManifest":
        digest = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
        return cls(config_sha256=digest, master_seed=seed, version=__version__,
                   timings={k: round(float(v), 6) for k, v in timings.items()},
                   outputs=tuple(str(p) for p in outputs))

    def write(self, directory: str) -> str:
        path = os.path.join(directory or ".", "manifest.json")
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps(asdict(self), indent=2) + "\n")
        return path


def _check_theta0(cfg: ScenarioConfig) -> None:
    t, lo, hi = cfg.theta0, cfg.box.lower, cfg.box.upper
    bad = np.flatnonzero((t <= lo) | (t >= hi))
    if bad.size:
        a = int(bad[0])
        raise ConfigError(
            f"[truth] theta0 coordinate {a} = {t[a]:g} is outside the open "
            f"box ({lo[a]:g}, {hi[a]:g})")


def _estimator_options(cfg: ScenarioConfig, method: str) -> dict:
    allowed = _BE_OPTIONS if method == "be" else _MLE_OPTIONS
    return {k: v for k, v in cfg.estimator_options.items() if k in allowed}


def _result_dict(result: EstimateResult) -> dict:
    return {
        "theta_hat": [float(v) for v in result.values],
        "method": result.method,
        "log_likelihood": float(result.log_likelihood),
        "evaluations": int(result.evaluations),
        "iterations": int(result.iterations),
        "boundary": bool(result.boundary),
        "ess": None if result.ess is None else float(result.ess),
        "posterior_mass": (None if result.posterior_mass is None
                           else float(result.posterior_mass)),
        "attempts": int(result.attempts),
        "warnings": list(result.warnings),
    }


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    _check_theta0(cfg)
    validate_scenario(cfg.model, cfg.array, cfg.box)
    t1 = time.perf_counter()
    obs = simulate(cfg.model, cfg.array, cfg.theta0, seed=args.seed)
    write_jsonl(obs, args.out)
    t2 = time.perf_counter()
    total = sum(len(r.events) for r in obs.records)
    print(f"simulated scenario {cfg.name!r}: {total} events over "
          f"{cfg.array.size} detectors -> {args.out}")
    manifest = RunManifest.build(cfg.text, args.seed,
                                 {"load": t1 - t0, "simulate": t2 - t1},
                                 [args.out])
    manifest.write(os.path.dirname(args.out))
    return EXIT_OK


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    method = args.method or (cfg.experiment or {}).get("estimator", "mle")
    if method not in ("mle", "be"):
        raise ConfigError(f"[experiment] estimator must be 'mle' or 'be', "
                          f"got {method!r}")
    obs = read_jsonl(args.data, cfg.model, cfg.array)
    t1 = time.perf_counter()
    options = _estimator_options(cfg, method)
    if method == "be":
        result = bayes_estimate(obs, cfg.box, seed=args.seed, **options)
    else:
        result = mle(obs, cfg.box, **options)
    t2 = time.perf_counter()
    payload = _result_dict(result)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")
    theta = ", ".join(f"{v:.5f}" for v in payload["theta_hat"])
    print(f"{method} estimate [{theta}] -> {args.out}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    manifest = RunManifest.build(cfg.text, args.seed,
                                 {"load": t1 - t0, "estimate": t2 - t1},
                                 [args.out])
    manifest.write(os.path.dirname(args.out))
    return EXIT_OK


def cmd_experiment(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    _check_theta0(cfg)
    out_dir = args.out_dir or os.path.join("runs", cfg.name)
    harness_cfg = experiment_config(cfg, workers=args.workers,
                                    master_seed=args.seed, out_dir=out_dir,
                                    force=args.force)
    t1 = time.perf_counter()
    timings = {"load": t1 - t0}
    outputs = []
    if args.check == "rate":
        report = run_rate_experiment(harness_cfg)
        timings["experiment"] = time.perf_counter() - t1
        outputs += [os.path.join(out_dir, "results.csv"),
                    os.path.join(out_dir, "rates.json")]
        verdict = "pass" if report.passed else "fail"
        print(f"rate experiment {cfg.name!r}: slope {report.slope:.4f} "
              f"(se {report.slope_se:.4f}) vs target {report.target:.4f} "
              f"+/- {report.tolerance}: {verdict}")
        if report.note:
            print(f"note: {report.note}")
    elif args.check == "normality":
        report = normality_check(harness_cfg)
        timings["normality"] = time.perf_counter() - t1
        outputs.append(os.path.join(out_dir, "normality.json"))
        print(f"normality check {cfg.name!r}: covariance error "
              f"{report['cov_rel_frobenius']:.3f}, risk ratio "
              f"{report['risk_ratio']:.3f}")
    else:
        grid = cfg.grid_spec()
        count = cfg.limits_options.get("count")
        report = limit_law_check(harness_cfg, sampler_count=count,
                                 control=True, grid_spec=grid)
        timings["limits"] = time.perf_counter() - t1
        outputs.append(os.path.join(out_dir, "limits.csv"))
        print(f"limit-law check {cfg.name!r}: p {report['p_value']:.4f}, "
              f"wrong-rescaling control p {report['control_p_value']:.4f}")
    manifest = RunManifest.build(cfg.text, harness_cfg.master_seed, timings,
                                 outputs)
    manifest.write(out_dir)
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = load_config(args.config)
    verdict = identifiability_screen(cfg.array, cfg.box)
    print(f"verdict: {verdict.kind}")
    witness_line = (verdict.witness.describe()
                    if verdict.witness is not None else None)
    if verdict.note and verdict.note != witness_line:
        print(verdict.note)
    if witness_line:
        print(witness_line)
    if verdict.confusable is not None:
        a, b = verdict.confusable
        print("confusable inside the box:")
        print(f"  theta  = {np.asarray(a).tolist()}")
        print(f"  theta' = {np.asarray(b).tolist()}")
    return EXIT_OK if verdict.identifiable else EXIT_IDENTIFIABILITY


def cmd_limits(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    _check_theta0(cfg)
    law = args.law or cfg.limits_options.get("law", "auto")
    count = args.count or cfg.limits_options.get("count", 300)
    if law == "auto":
        law = {Regime.SMOOTH: "zeta", Regime.CUSP: "xi",
               Regime.CHANGE_POINT: "eta"}[cfg.model.regime]
    grid = cfg.grid_spec()
    if law == "zeta":
        fisher = fisher_information(cfg.model, cfg.array, cfg.theta0)
        sample = sample_zeta(fisher, count, seed=args.seed)
    elif law == "xi":
        sample = sample_xi(cfg.theta0, cfg.array, cfg.model, grid_spec=grid,
                           count=count, seed=args.seed)
    else:
        sample = sample_eta(cfg.theta0, cfg.array, cfg.model, grid_spec=grid,
                            count=count, seed=args.seed)
    write_draws_csv(sample, args.out)
    t1 = time.perf_counter()
    print(f"{count} draws of {law} -> {args.out} "
          f"(mean square norm {sample.mean_square_norm():.5f})")
    manifest = RunManifest.build(cfg.text, args.seed, {"limits": t1 - t0},
                                 [args.out])
    manifest.write(os.path.dirname(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poissonloc",
        description="Two-source localization from Poisson detector streams")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one observation set")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="observations.jsonl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate sources from recorded data")
    p.add_argument("data", help="observations JSON-lines file")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--method", choices=["mle", "be"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="estimate.json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="run a Monte Carlo pipeline")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--check", choices=["rate", "normality", "limits"],
                   default="rate")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--force", action="store_true",
                   help="run even when the layout fails the screen")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("identify", help="screen the detector layout")
    p.add_argument("config", help="scenario TOML file")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("limits", help="draw from a limit law")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--law", choices=["auto", "zeta", "xi", "eta"],
                   default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="limit_draws.csv")
    p.set_defaults(func=cmd_limits)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IdentifiabilityError as err:
        print(f"error: {err}", file=sys.stderr)
        if err.witness is not None and err.witness.describe() not in str(err):
            print(err.witness.describe(), file=sys.stderr)
        return EXIT_IDENTIFIABILITY
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DomainError, RegimeError, SingularFisherError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
