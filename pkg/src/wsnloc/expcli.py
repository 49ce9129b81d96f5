"""Experiment runner and command-line interface.

Subcommands: ``scenario`` (build and save a field), ``localize`` (run
trials of one method/placement), ``optimize`` (anchor placement search),
``report`` (method x placement comparison grid). Every run derives all
trial seeds from one master seed, writes CSV/SVG artifacts plus a
``manifest.txt`` of sha256 hashes, and is byte-reproducible for a fixed
config regardless of the worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ._seeds import TAG_TRIAL, derive
from .baselines import dvhop_localize
from .energy import (EnergyConfig, account_trace, write_energy_csv,
                     write_energy_summary_csv)
from .field import (MeasurementModel, build_scenario, measure_ranges,
                    place_anchors_preset, save_scenario)
from .moea import GaConfig, evaluate_chromosome, nsga2_run, write_generation_log_csv, \
    write_pareto_csv
from .nbp import NbpParams, mean_error, run_nbp, write_result_csv
from .svgplot import emit_svg

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "run_experiment",
           "run_report", "main"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass
class ExperimentConfig:
    width: float = 100.0
    height: float = 100.0
    radius: float = 15.0
    n_unknown: int = 100
    noise_sigma: float = 1.0
    min_distance_floor: float = 0.1
    method: str = "nbp"
    placement: str = "edge"
    anchor_count: int = 9
    trials: int = 10
    seed: int = 0
    out: str = "out"
    workers: int = 1
    nbp_particles: int = 100
    nbp_max_iterations: int = 10
    nbp_convergence_shift: float = 0.1
    nbp_weight_floor_eps: float = 1e-8
    nbp_estimator: str = "map"
    ga_population: int = 40
    ga_max_generations: int = 100
    ga_stall_generations: int = 10
    ga_crossover_rate: float = 0.9
    ga_mutation_sigma: float = 5.0
    ga_length_mutation_rate: float = 0.1
    ga_n_min: int = 3
    ga_n_max: int = 12

    def nbp_params(self) -> NbpParams:
        return NbpParams(self.nbp_particles, self.nbp_max_iterations,
                         self.nbp_convergence_shift, self.nbp_weight_floor_eps,
                         self.nbp_estimator)

    def ga_config(self) -> GaConfig:
        return GaConfig(self.ga_population, self.ga_max_generations,
                        self.ga_stall_generations, self.ga_crossover_rate,
                        self.ga_mutation_sigma, self.ga_length_mutation_rate,
                        self.ga_n_min, self.ga_n_max, master_seed=self.seed,
                        width=self.width, height=self.height)

    def measurement_model(self) -> MeasurementModel:
        return MeasurementModel(self.noise_sigma, self.min_distance_floor)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_CHOICES = {"method": ("nbp", "dvhop"), "placement": ("mo", "edge", "rand"),
            "nbp_estimator": ("map", "mean")}
_CONSTRAINTS = {
    "width": lambda v: v > 0, "height": lambda v: v > 0, "radius": lambda v: v > 0,
    "n_unknown": lambda v: v >= 0, "noise_sigma": lambda v: v >= 0,
    "min_distance_floor": lambda v: v > 0, "anchor_count": lambda v: v >= 1,
    "trials": lambda v: v >= 1, "seed": lambda v: v >= 0, "workers": lambda v: v >= 1,
    "nbp_particles": lambda v: v >= 10, "nbp_max_iterations": lambda v: v >= 1,
    "nbp_convergence_shift": lambda v: v > 0,
    "nbp_weight_floor_eps": lambda v: 0 < v < 1,
    "ga_population": lambda v: v >= 4 and v % 2 == 0,
    "ga_max_generations": lambda v: v >= 0, "ga_stall_generations": lambda v: v >= 1,
    "ga_crossover_rate": lambda v: 0 <= v <= 1,
    "ga_mutation_sigma": lambda v: v >= 0,
    "ga_length_mutation_rate": lambda v: 0 <= v <= 1,
    "ga_n_min": lambda v: v >= 1, "ga_n_max": lambda v: v >= 1,
}


def _convert(key: str, raw: str, where: str):
    target = _FIELD_TYPES[key]
    try:
        if target in ("int", int):
            return int(raw)
        if target in ("float", float):
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"{where}: key '{key}' expects {target}, got {raw!r}") from None


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Config from an optional `key = value` file plus override pairs.

    Unknown and duplicate keys are rejected; every constraint violation
    names the key it concerns.
    """
    raw: dict[str, object] = {}
    if path is not None:
        seen: dict[str, int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
                key, value = (part.strip() for part in text.split("=", 1))
                if key in seen:
                    raise ConfigError(f"{path}: line {lineno}: duplicate key '{key}' "
                                      f"(first on line {seen[key]})")
                if key not in _FIELD_TYPES:
                    raise ConfigError(f"{path}: line {lineno}: unknown key '{key}'")
                seen[key] = lineno
                raw[key] = _convert(key, value, f"{path}: line {lineno}")
    for key, value in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}'")
        raw[key] = _convert(key, str(value), "override") if isinstance(value, str) else value

    config = ExperimentConfig(**raw)
    for key, ok in _CONSTRAINTS.items():
        if not ok(getattr(config, key)):
            raise ConfigError(f"key '{key}': constraint violated (value "
                              f"{getattr(config, key)!r})")
    for key, choices in _CHOICES.items():
        if getattr(config, key) not in choices:
            raise ConfigError(f"key '{key}': must be one of {choices}")
    if config.ga_n_max < config.ga_n_min:
        raise ConfigError("key 'ga_n_max': must be >= ga_n_min")
    return config


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(outdir: Path, written) -> Path:
    manifest = outdir / "manifest.txt"
    lines = [f"{p.relative_to(outdir)},{_sha256(p)}" for p in sorted(written)]
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@dataclass
class ExperimentResult:
    out_dir: Path
    files: list
    trial_errors: list
    mean_error_m: float
    std_error_m: float
    metadata: dict


def _select_mo_anchors(archive, k: int):
    """Front-1 member whose anchor count is (nearest to) k."""
    ranked = sorted(archive.front1(),
                    key=lambda co: (abs(co[1].anchor_count - k),
                                    co[1].anchor_count, co[1].error_m))
    chrom, obj = ranked[0]
    return [tuple(p) for p in chrom.as_points()], obj.anchor_count


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all trials for one method/placement and write the artifact bundle."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        return _run_experiment_inner(config, outdir, written)
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _run_experiment_inner(config, outdir, written):
    model = config.measurement_model()
    params = config.nbp_params()
    metadata = {"method": config.method, "placement": config.placement,
                "anchor_count": config.anchor_count}

    fixed_anchors = None
    if config.placement == "edge":
        fixed_anchors = place_anchors_preset("edge", config.anchor_count,
                                             config.width, config.height)
    elif config.placement == "mo":
        base = build_scenario(config.width, config.height, config.radius,
                              config.n_unknown, [], config.seed)
        archive = nsga2_run(base, params, config.ga_config(), model,
                            workers=config.workers)
        fixed_anchors, chosen = _select_mo_anchors(archive, config.anchor_count)
        metadata["mo_selected_anchor_count"] = chosen
        path = outdir / "pareto.csv"
        write_pareto_csv(archive, path)
        written.append(path)
        path = outdir / "generation_log.csv"
        write_generation_log_csv(archive, path)
        written.append(path)
        path = outdir / "pareto.svg"
        emit_svg("pareto", {"points": [(o.anchor_count, o.error_m)
                                       for _c, o in archive.front1()]}, path)
        written.append(path)

    def run_trial(i: int):
        trial_seed = derive(config.seed, TAG_TRIAL, i)
        anchors = fixed_anchors if fixed_anchors is not None else \
            place_anchors_preset("random", config.anchor_count, config.width,
                                 config.height, trial_seed)
        scenario = build_scenario(config.width, config.height, config.radius,
                                  config.n_unknown, anchors, trial_seed)
        ranges = measure_ranges(scenario, model, trial_seed)
        if config.method == "nbp":
            result = run_nbp(scenario, ranges, params, trial_seed, model)
        else:
            result = dvhop_localize(scenario, ranges)
        ledger = account_trace(result.trace, EnergyConfig(),
                               method=config.method, placement=config.placement)
        return scenario, result, ledger

    if config.workers > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(run_trial, range(config.trials)))
    else:
        trials = [run_trial(i) for i in range(config.trials)]

    errors = []
    ledgers = []
    for i, (scenario, result, ledger) in enumerate(trials):
        errors.append(mean_error(result, scenario))
        ledgers.append(ledger)
        path = outdir / f"nodes_trial{i:02d}.csv"
        write_result_csv(result, scenario, path)
        written.append(path)
        path = outdir / f"trace_trial{i:02d}.csv"
        result.trace.write_csv(path)
        written.append(path)

    scenario0, result0, _ = trials[0]
    path = outdir / "field_trial00.svg"
    emit_svg("field", {
        "width": scenario0.width, "height": scenario0.height,
        "true_positions": {n.id: n.true_pos for n in scenario0.nodes},
        "estimates": {t: tuple(p) for t, p in result0.estimates.items()},
        "anchor_ids": scenario0.anchor_ids,
    }, path)
    written.append(path)
    if config.method == "nbp" and result0.mean_error_history:
        path = outdir / "convergence_trial00.svg"
        emit_svg("convergence", {"mean_error_history": result0.mean_error_history}, path)
        written.append(path)

    mean_e = float(np.mean(errors))
    std_e = float(np.std(errors))
    path = outdir / "summary.csv"
    lines = ["method,placement,anchor_count,trials,mean_error_m,std_error_m"]
    lines.append(f"{config.method},{config.placement},{config.anchor_count},"
                 f"{config.trials},{mean_e:.6f},{std_e:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(path)

    path = outdir / "energy.csv"
    write_energy_csv(ledgers, path)
    written.append(path)
    path = outdir / "energy_summary.csv"
    write_energy_summary_csv(ledgers, path)
    written.append(path)

    manifest = _write_manifest(outdir, written)
    return ExperimentResult(outdir, written + [manifest], errors, mean_e, std_e,
                            metadata)


def run_report(config: ExperimentConfig) -> Path:
    """Method x placement comparison grid under common trial seeds."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    all_files = []
    for method in ("nbp", "dvhop"):
        for placement in ("edge", "rand"):
            sub = parse_config(overrides={
                **{k: getattr(config, k) for k in _FIELD_TYPES},
                "method": method, "placement": placement,
                "out": str(outdir / f"{method}_{placement}")})
            result = run_experiment(sub)
            rows.append((method, placement, result.mean_error_m, result.std_error_m))
            all_files.extend(result.files)
    path = outdir / "report.csv"
    lines = ["method,placement,anchor_count,mean_error_m,std_error_m"]
    lines += [f"{m},{p},{config.anchor_count},{e:.6f},{s:.6f}" for m, p, e, s in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _build_cli() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsnloc",
                                     description="Sensor-network localization experiments")
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scenario", help="build a scenario and save it")
    sub.add_parser("localize", help="run localization trials")
    sub.add_parser("optimize", help="search anchor placements")
    sub.add_parser("report", help="compare methods and placements")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    args = _build_cli().parse_args(argv)
    try:
        config = _load(args)
        outdir = Path(config.out)
        if args.command == "scenario":
            outdir.mkdir(parents=True, exist_ok=True)
            anchors = place_anchors_preset(
                "edge" if config.placement != "rand" else "random",
                config.anchor_count, config.width, config.height, config.seed)
            scenario = build_scenario(config.width, config.height, config.radius,
                                      config.n_unknown, anchors, config.seed)
            path = outdir / "scenario.txt"
            save_scenario(path, scenario, config.noise_sigma)
            emit_svg("field", {"width": scenario.width, "height": scenario.height,
                               "true_positions": {n.id: n.true_pos for n in scenario.nodes},
                               "anchor_ids": scenario.anchor_ids},
                     outdir / "scenario.svg")
            _write_manifest(outdir, [path, outdir / "scenario.svg"])
            print(f"wrote {path}")
        elif args.command == "localize":
            result = run_experiment(config)
            print(f"{config.method}/{config.placement}: mean error "
                  f"{result.mean_error_m:.3f} m (std {result.std_error_m:.3f}) "
                  f"over {config.trials} trials -> {result.out_dir}")
        elif args.command == "optimize":
            outdir.mkdir(parents=True, exist_ok=True)
            base = build_scenario(config.width, config.height, config.radius,
                                  config.n_unknown, [], config.seed)
            archive = nsga2_run(base, config.nbp_params(), config.ga_config(),
                                config.measurement_model(), workers=config.workers)
            write_pareto_csv(archive, outdir / "pareto.csv")
            write_generation_log_csv(archive, outdir / "generation_log.csv")
            emit_svg("pareto", {"points": [(o.anchor_count, o.error_m)
                                           for _c, o in archive.front1()]},
                     outdir / "pareto.svg")
            _write_manifest(outdir, [outdir / "pareto.csv",
                                     outdir / "generation_log.csv",
                                     outdir / "pareto.svg"])
            best = min(archive.front1(), key=lambda co: co[1].error_m)
            print(f"front 1: {len(archive.fronts[0])} members; best error "
                  f"{best[1].error_m:.3f} m at {best[1].anchor_count} anchors "
                  f"-> {outdir}")
        elif args.command == "report":
            path = run_report(config)
            print(f"wrote {path}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
