"""Command-line front end: config parsing, subcommands, exit codes.

Subcommands
    simulate     write one trajectory CSV from the configured DGP
    estimate     fit nuisances on an auxiliary CSV, estimate on a second CSV
    experiment   run the Monte Carlo harness (or a coverage sweep over T)
    true-effect  print the analytic estimand (optionally a Monte Carlo oracle)

Configs are YAML with three sections: ``dgp`` (model parameters, keyed by
``kind: ade | switchback``), ``experiment`` (mirrors the Scenario fields,
plus ``T_grid`` to request a sweep), and ``forest`` (hyperparameters for
the nuisance forests). Unknown keys anywhere are rejected. ``--config``
accepts either a file path or the name of a bundled preset.

Seeds resolve as ``--seed`` > ``DML4SSI_SEED`` > ``experiment.base_seed``.
Stream layout matches the harness: ``simulate`` reproduces replication 0's
inference trajectory of an experiment with the same seed, and ``estimate``
fits with replication 0's forest-fit stream.

Exit codes: 0 success, 1 usage error, 2 config/schema error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import fields as dataclass_fields
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml

from .core import (
    SwitchbackDesign,
    Trajectory,
    TrajectoryFormatError,
    geometric_ergodic,
    m_dependent,
    read_trajectory_csv,
    write_trajectory_csv,
)
from .dgp import (
    AdeDgpConfig,
    SwitchbackDgpConfig,
    oracle_true_ade,
    oracle_true_gate,
    simulate_ade_dgp,
    simulate_switchback_dgp,
    true_ade,
    true_gate,
)
from .estimators import ALL_ESTIMATORS
from .harness import (
    STAGE_FOREST_FIT,
    STAGE_INFERENCE_SIM,
    Scenario,
    _estimate_one,
    _fit_nuisances,
    _needed_models,
    coverage_sweep,
    emit_csv,
    run_experiment,
)
from .rng import RngStream, derive_stream
from .variance import (
    VARIANCE_KINDS,
    VarianceMethod,
    confidence_interval,
    variance_for,
)

SEED_ENV_VAR = "DML4SSI_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ESTIMATE_COLUMNS = (
    "estimator",
    "psi_hat",
    "sigma2_hat",
    "ci_low",
    "ci_high",
    "alpha",
    "T",
    "degenerate",
)


class ConfigError(Exception):
    """Invalid config document; message carries the dotted key path."""


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the contract wants 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _field_names(cls) -> Tuple[str, ...]:
    return tuple(f.name for f in dataclass_fields(cls))


_ADE_KEYS = _field_names(AdeDgpConfig)
_SB_KEYS = tuple(k for k in _field_names(SwitchbackDgpConfig) if k != "design")
_DESIGN_KEYS = _field_names(SwitchbackDesign)
_EXPERIMENT_KEYS = (
    "T",
    "aux_T",
    "estimators",
    "R",
    "base_seed",
    "variance_assignments",
    "alpha",
    "jobs",
    "use_oracle_nuisances",
    "root_stream_id",
    "T_grid",
)
_FOREST_KEYS = ("n_trees", "min_samples_leaf", "feature_fraction", "max_depth")
_VARIANCE_KEYS = ("kind", "theta", "m")


def _require_mapping(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(section: dict, allowed: Sequence[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}")


DgpConfig = Union[AdeDgpConfig, SwitchbackDgpConfig]


def build_dgp(section: dict) -> DgpConfig:
    """Construct the DGP config named by ``dgp.kind``, strictly validated."""
    sec = _require_mapping(section, "dgp")
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError("dgp.kind is required (ade or switchback)")
    if kind == "ade":
        _reject_unknown(sec, ("kind",) + _ADE_KEYS, "dgp")
        kwargs = {k: v for k, v in sec.items() if k != "kind"}
        try:
            return AdeDgpConfig(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"dgp: {exc}") from exc
    if kind == "switchback":
        _reject_unknown(sec, ("kind", "design") + _SB_KEYS, "dgp")
        design_sec = _require_mapping(sec.get("design"), "dgp.design")
        _reject_unknown(design_sec, _DESIGN_KEYS, "dgp.design")
        try:
            design = SwitchbackDesign(**design_sec)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"dgp.design: {exc}") from exc
        kwargs = {k: v for k, v in sec.items() if k not in ("kind", "design")}
        try:
            return SwitchbackDgpConfig(design=design, **kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"dgp: {exc}") from exc
    raise ConfigError(f"dgp.kind must be 'ade' or 'switchback', got {kind!r}")


def _build_variance_assignments(section, path: str) -> Dict[str, VarianceMethod]:
    sec = _require_mapping(section, path)
    out: Dict[str, VarianceMethod] = {}
    for label, spec in sec.items():
        if label not in ALL_ESTIMATORS:
            raise ConfigError(f"{path}.{label}: unknown estimator label")
        spec = _require_mapping(spec, f"{path}.{label}")
        _reject_unknown(spec, _VARIANCE_KEYS, f"{path}.{label}")
        kind = spec.get("kind")
        if kind not in VARIANCE_KINDS:
            raise ConfigError(
                f"{path}.{label}.kind must be one of {sorted(VARIANCE_KINDS)}, got {kind!r}"
            )
        kwargs = {k: v for k, v in spec.items() if k != "kind"}
        try:
            out[label] = VarianceMethod(kind=kind, **kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}.{label}: {exc}") from exc
    return out


class CliConfig:
    """Validated view of the YAML document; sections mirror library types."""

    def __init__(self, doc: dict) -> None:
        doc = _require_mapping(doc, "config")
        _reject_unknown(doc, ("dgp", "experiment", "forest"), "config")
        if "dgp" not in doc:
            raise ConfigError("dgp section is required")
        self.dgp = build_dgp(doc["dgp"])
        exp = _require_mapping(doc.get("experiment"), "experiment")
        _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment")
        self.experiment = dict(exp)
        if "variance_assignments" in exp:
            self.experiment["variance_assignments"] = _build_variance_assignments(
                exp["variance_assignments"], "experiment.variance_assignments"
            )
        forest = _require_mapping(doc.get("forest"), "forest")
        _reject_unknown(forest, _FOREST_KEYS, "forest")
        self.forest = dict(forest)

    @property
    def is_switchback(self) -> bool:
        return isinstance(self.dgp, SwitchbackDgpConfig)

    def base_seed(self) -> Optional[int]:
        seed = self.experiment.get("base_seed")
        if seed is not None and not isinstance(seed, int):
            raise ConfigError("experiment.base_seed: expected an integer")
        return seed

    def horizon(self) -> int:
        T = self.experiment.get("T")
        if not isinstance(T, int) or T < 1:
            raise ConfigError("experiment.T: expected a positive integer")
        return T

    def t_grid(self) -> Optional[List[int]]:
        grid = self.experiment.get("T_grid")
        if grid is None:
            return None
        if not isinstance(grid, list) or not grid or not all(
            isinstance(t, int) for t in grid
        ):
            raise ConfigError("experiment.T_grid: expected a nonempty list of integers")
        return grid

    def estimators(self) -> Tuple[str, ...]:
        ests = self.experiment.get("estimators")
        if not isinstance(ests, list) or not ests:
            raise ConfigError("experiment.estimators: expected a nonempty list")
        return tuple(ests)

    def scenario(self, seed: int, jobs_override: Optional[int] = None) -> Scenario:
        """Assemble the harness Scenario (T_grid handled by the caller)."""
        exp = {k: v for k, v in self.experiment.items() if k != "T_grid"}
        exp["base_seed"] = seed
        if jobs_override is not None:
            exp["jobs"] = jobs_override
        if "aux_T" not in exp and "T" in exp:
            exp["aux_T"] = exp["T"]
        missing = [k for k in ("T", "aux_T", "R", "estimators") if k not in exp]
        if missing:
            raise ConfigError(f"experiment: missing required keys {missing}")
        if isinstance(exp.get("estimators"), list):
            exp["estimators"] = tuple(exp["estimators"])
        try:
            return Scenario(dgp=self.dgp, **exp, **self.forest)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"experiment: {exc}") from exc

    def scenario_for_estimate(self, T: int, aux_T: int, seed: int) -> Scenario:
        """Scenario shim for one-shot estimation; horizons come from the data."""
        keep = ("alpha", "variance_assignments", "use_oracle_nuisances")
        exp = {k: v for k, v in self.experiment.items() if k in keep}
        try:
            return Scenario(
                dgp=self.dgp,
                T=T,
                aux_T=aux_T,
                estimators=self.estimators(),
                R=1,
                base_seed=seed,
                **exp,
                **self.forest,
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"experiment: {exc}") from exc


def _preset_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "presets")


def available_presets() -> List[str]:
    d = _preset_dir()
    if not os.path.isdir(d):
        return []
    return sorted(
        name[: -len(".yaml")] for name in os.listdir(d) if name.endswith(".yaml")
    )


def resolve_config_path(value: str) -> str:
    """A real file wins; otherwise fall back to a bundled preset name."""
    if os.path.exists(value):
        return value
    candidate = os.path.join(_preset_dir(), f"{value}.yaml")
    if os.sep not in value and os.path.exists(candidate):
        return candidate
    names = ", ".join(available_presets()) or "none bundled"
    raise ConfigError(
        f"config {value!r} is neither a file nor a bundled preset (presets: {names})"
    )


def load_config(value: str) -> CliConfig:
    path = resolve_config_path(value)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return CliConfig(doc)


def resolve_seed(args: argparse.Namespace, cfg: CliConfig) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
    seed = cfg.base_seed()
    if seed is None:
        raise ConfigError(
            f"no seed: set experiment.base_seed, {SEED_ENV_VAR}, or --seed"
        )
    return seed


def _simulate_trajectory(cfg: CliConfig, T: int, seed: int) -> Trajectory:
    stream = derive_stream(RngStream(seed, 0), STAGE_INFERENCE_SIM)
    if cfg.is_switchback:
        return simulate_switchback_dgp(cfg.dgp, T, stream)
    return simulate_ade_dgp(cfg.dgp, T, stream)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    traj = _simulate_trajectory(cfg, cfg.horizon(), seed)
    try:
        write_trajectory_csv(traj, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {traj.T} observations to {args.out}")
    return EXIT_OK


def _read_traj(path: str, cfg: CliConfig) -> Trajectory:
    if cfg.is_switchback:
        design = cfg.dgp.design
        traj = read_trajectory_csv(path, m_dependent(design.m), design)
        if traj.p_h != 2 * design.m:
            raise ConfigError(
                f"{path}: shared state has {traj.p_h} columns, design m={design.m} "
                f"needs {2 * design.m}"
            )
    else:
        traj = read_trajectory_csv(path, geometric_ergodic())
    return traj


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    estimators = cfg.estimators()
    if os.path.realpath(args.traj) == os.path.realpath(args.aux):
        print(
            "warning: auxiliary and inference files are the same; nuisance "
            "independence is violated and the intervals are not trustworthy",
            file=sys.stderr,
        )
    try:
        traj = _read_traj(args.traj, cfg)
        aux = _read_traj(args.aux, cfg)
    except TrajectoryFormatError as exc:
        for problem in exc.problems:
            print(f"schema error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    scenario = cfg.scenario_for_estimate(traj.T, aux.T, seed)
    try:
        fit_stream = derive_stream(RngStream(seed, 0), STAGE_FOREST_FIT)
        models = _fit_nuisances(scenario, aux, fit_stream, _needed_models(estimators))
        rows = []
        for est in estimators:
            psi_hat, phis = _estimate_one(scenario, est, traj, models)
            method = scenario.variance_method(est)
            sigma2, degenerate = variance_for(
                method, phis, traj=traj, propensity=models.get("m")
            )
            lo, hi = confidence_interval(
                psi_hat, max(sigma2, 0.0), traj.T, scenario.alpha
            )
            rows.append(
                (est, psi_hat, sigma2, lo, hi, scenario.alpha, traj.T, degenerate)
            )
    except Exception as exc:  # noqa: BLE001 - estimation failures exit 3
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ESTIMATE_COLUMNS)
            for est, psi_hat, sigma2, lo, hi, alpha, T, degen in rows:
                w.writerow(
                    [
                        est,
                        f"{psi_hat:.17g}",
                        f"{sigma2:.17g}",
                        f"{lo:.17g}",
                        f"{hi:.17g}",
                        f"{alpha:.17g}",
                        T,
                        int(degen),
                    ]
                )
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for est, psi_hat, _s, lo, hi, _a, _T, _d in rows:
        print(f"{est:10s} psi_hat={psi_hat:+.6f}  ci=[{lo:+.6f}, {hi:+.6f}]")
    return EXIT_OK


def _print_summaries(report) -> None:
    s = report.scenario
    print(
        f"T={s.T} aux_T={s.aux_T} R={s.R} psi_star={report.psi_star:.6f} "
        f"({report.wall_clock_s:.1f}s)"
    )
    for est in s.estimators:
        if est not in report.summaries:
            n_err = sum(1 for r in report.replications if est in r.errors)
            print(f"  {est:10s} all {n_err} replications failed")
            continue
        summ = report.summaries[est]
        print(
            f"  {est:10s} bias={summ.mean_bias:+.4f} (mc_se={summ.mc_se:.4f}) "
            f"coverage={summ.coverage:.3f} width={summ.mean_ci_width:.3f}"
        )


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args, cfg)
    grid = cfg.t_grid()
    scenario = cfg.scenario(seed, jobs_override=args.jobs)
    try:
        if grid is None:
            report = run_experiment(scenario)
            emit_csv(report, args.out_dir)
            _print_summaries(report)
        else:
            for report in coverage_sweep(scenario, grid):
                emit_csv(report, args.out_dir, suffix=f"_T{report.scenario.T}")
                _print_summaries(report)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - harness/IO failures exit 3
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _parse_oracle_reps(value: str) -> int:
    text = value[2:] if value.startswith("R=") else value
    try:
        reps = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if reps < 1:
        raise argparse.ArgumentTypeError("oracle replication count must be positive")
    return reps


def cmd_true_effect(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if cfg.is_switchback:
        truth = true_gate(cfg.dgp)
    else:
        T = cfg.experiment.get("T")
        truth = true_ade(cfg.dgp, T=T if isinstance(T, int) else None)
    print(f"psi_star = {truth.psi_star:.17g}  ({truth.method})")
    if args.oracle is not None:
        seed = resolve_seed(args, cfg)
        rng = RngStream(seed, 0)
        if cfg.is_switchback:
            mc = oracle_true_gate(cfg.dgp, args.oracle, rng)
        else:
            mc = oracle_true_ade(
                cfg.dgp, args.oracle, rng, T=cfg.experiment.get("T")
            )
        print(f"psi_star_oracle = {mc.psi_star:.17g}  (se = {mc.se:.3g}, R = {args.oracle})")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dml4ssi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="config file or preset name")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "write a trajectory CSV")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("estimate", cmd_estimate, "estimate from trajectory CSVs")
    p.add_argument("--traj", required=True, help="inference trajectory CSV")
    p.add_argument("--aux", required=True, help="auxiliary (training) trajectory CSV")
    p.add_argument("--out", required=True, help="output report CSV path")

    p = add("experiment", cmd_experiment, "run the Monte Carlo harness")
    p.add_argument("--out-dir", required=True, help="directory for result CSVs")
    p.add_argument("--jobs", type=int, default=None, help="parallel replications")

    p = add("true-effect", cmd_true_effect, "print the analytic estimand")
    p.add_argument(
        "--oracle",
        type=_parse_oracle_reps,
        default=None,
        metavar="R",
        help="also run a Monte Carlo oracle with R replications",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrajectoryFormatError as exc:
        for problem in exc.problems:
            print(f"schema error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
