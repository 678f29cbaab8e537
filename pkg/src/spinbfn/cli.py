"""Command-line front end: simulate, estimate, validate, sweep.

Orchestrates the full pipeline (control synthesis, truth simulation,
noise, nudging estimation, oracle cross-check) and serializes every trace
needed to reproduce or plot a run. Time series go to CSV, matrices and
metadata to JSON with complex entries as {"re": .., "im": ..}. stdout
carries one summary JSON object per command; human diagnostics go to
stderr. Exit codes: 2 invalid configuration, 3 control resampling
exhausted, 4 integration failure, 5 record/config grid mismatch,
6 observer blowup.
"""

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import qops
from .bfn import envelope_decreasing, run_bfn
from .controls import (
    ControlField,
    check_theorem_precondition,
    export_field_csv,
    field_from_table,
    import_field_csv,
    precondition_threshold,
    sample_random_field,
    synthesize_phase,
)
from .dynamics import (
    MeasurementRecord,
    PhysicsConfig,
    add_noise,
    derived_seeds,
    simulate_truth,
    spin1_preset,
    trajectory_min_eigenvalue,
    two_level_preset,
)
from .errors import (
    BlowupError,
    ControlSamplingError,
    GridMismatchError,
    IntegrationError,
    UnobservableControlError,
)
from .oracle import build_response, export_response_csv, reconstruct

EXIT_INVALID_CONFIG = 2
EXIT_SAMPLING_EXHAUSTED = 3
EXIT_INTEGRATION_FAILURE = 4
EXIT_GRID_MISMATCH = 5
EXIT_BLOWUP = 6

SPIN1_TRUTH = 0.5 * np.array(
    [[1, 0, 1], [0, 0, 0], [1, 0, 1]], dtype=complex
)

EMIT_CHOICES = ("vk", "ztrace", "record", "estimate", "response")

PRECONDITION_HYPOTHESIS = "Bx(0)*By'(0) - By(0)*Bx'(0) != 0"


@dataclass
class ExperimentConfig:
    physics: PhysicsConfig
    n_iterations: int = 10
    truth_state: object = "random-pure"  # "random-pure" | "paper-spin1" | matrix | None
    control_knots: list | None = None    # inline phase knots (uniform times)
    control_csv: str | None = None       # external (t, theta, bx, by) table
    outputs: str = "outputs"
    emit: tuple = ("vk", "ztrace", "record", "estimate")
    preset: str | None = None


def preset_config(name: str) -> ExperimentConfig:
    """The two benchmark protocols: 10% measurement and field noise, random
    pure truth with 10 iterations for the two-level system, the named
    spin-1 superposition state with 50 iterations for the three-level one."""
    if name == "paper-2level":
        return ExperimentConfig(
            physics=two_level_preset(noise_meas=0.1, noise_field=0.1),
            n_iterations=10,
            truth_state="random-pure",
            preset=name,
        )
    if name == "paper-spin1":
        return ExperimentConfig(
            physics=spin1_preset(noise_meas=0.1, noise_field=0.1),
            n_iterations=50,
            truth_state="paper-spin1",
            preset=name,
        )
    raise ValueError(f"unknown preset {name!r}; available: paper-2level, paper-spin1")


# --------------------------------------------------------------------------
# JSON helpers


def matrix_to_json(m: np.ndarray) -> list:
    return [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(obj) -> np.ndarray:
    return np.array([[complex(cell["re"], cell["im"]) for cell in row] for row in obj])


def config_to_json(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["physics"] = dataclasses.asdict(cfg.physics)
    if isinstance(cfg.truth_state, np.ndarray):
        out["truth_state"] = matrix_to_json(cfg.truth_state)
    out["emit"] = list(cfg.emit)
    return out


def config_from_json(obj: dict) -> ExperimentConfig:
    data = dict(obj)
    physics = PhysicsConfig(**data.pop("physics", {}))
    truth = data.pop("truth_state", "random-pure")
    if isinstance(truth, list):
        truth = matrix_from_json(truth)
    emit = tuple(data.pop("emit", ("vk", "ztrace", "record", "estimate")))
    for key in emit:
        if key not in EMIT_CHOICES:
            raise ValueError(f"unknown emit flag {key!r}; choices: {EMIT_CHOICES}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(physics=physics, truth_state=truth, emit=emit, **data)


# --------------------------------------------------------------------------
# CSV / file IO (repr floats so that written values round-trip exactly)


def write_record_csv(record: MeasurementRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value", "clean_value"])
        for t, v, c in zip(record.times, record.values, record.clean_values):
            writer.writerow([repr(float(t)), repr(float(v)), repr(float(c))])


def read_record_csv(path) -> MeasurementRecord:
    times, values, clean = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["t"]))
            values.append(float(row["value"]))
            clean.append(float(row["clean_value"]))
    return MeasurementRecord(
        times=np.array(times), values=np.array(values), clean_values=np.array(clean)
    )


def write_series_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


def run_to_json(run) -> dict:
    """Scalars and per-iteration arrays of a BfnRun (dense traces go to CSV)."""
    out = {
        "n_iterations": run.n_iterations,
        "final_estimate": matrix_to_json(run.final_estimate),
        "estimates": [matrix_to_json(m) for m in run.estimates],
        "min_eigenvalue_trace": run.min_eigenvalue_trace.tolist(),
        "surrogate_residuals": run.surrogate_residuals.tolist(),
        "fidelity_vs_truth": run.fidelity_vs_truth,
    }
    if run.vk_sequence is not None:
        out["vk_sequence"] = run.vk_sequence.tolist()
        out["weighted_residuals"] = run.weighted_residuals.tolist()
    return out


# --------------------------------------------------------------------------
# Pipeline pieces shared by the commands


def resolve_control(cfg: ExperimentConfig, seeds) -> tuple[ControlField, str]:
    if cfg.control_csv is not None:
        return import_field_csv(cfg.control_csv), "csv"
    if cfg.control_knots is not None:
        knots = cfg.control_knots
        if knots and isinstance(knots[0], (list, tuple)):
            times = [row[0] for row in knots]
            phases = [row[1] for row in knots]
            return field_from_table(times, phases, cfg.physics.b0), "inline"
        return synthesize_phase(knots, cfg.physics.t_horizon, b0=cfg.physics.b0), "inline"
    return sample_random_field(cfg.physics, seeds.control), "random"


def resolve_truth(cfg: ExperimentConfig, seeds) -> np.ndarray | None:
    spec = cfg.truth_state
    if spec is None:
        return None
    if isinstance(spec, np.ndarray):
        return np.asarray(spec, dtype=complex)
    if spec == "random-pure":
        return qops.random_pure_state(cfg.physics.dim, np.random.default_rng(seeds.truth))
    if spec == "paper-spin1":
        return SPIN1_TRUTH.copy()
    raise ValueError(f"unknown truth_state {spec!r}")


def build_metadata(cfg: ExperimentConfig, control: ControlField, control_source: str,
                   truth: np.ndarray | None, record: MeasurementRecord,
                   min_traj_eig: float) -> dict:
    return {
        "preset": cfg.preset,
        "seed": cfg.physics.rng_seed,
        "seed_spawn_order": ["control", "truth", "noise_meas", "noise_field"],
        "physics": dataclasses.asdict(cfg.physics),
        "n_iterations": cfg.n_iterations,
        "control": {
            "source": control_source,
            "b0": control.b0,
            "knot_times": [float(t) for t in control.knot_times],
            "knot_phases": [float(p) for p in control.knot_phases],
            "knot_convention": "uniform, both endpoints included",
            "discriminant": check_theorem_precondition(control),
            "precondition_threshold": precondition_threshold(control.b0),
        },
        "truth_state": matrix_to_json(truth) if truth is not None else None,
        "noise": {
            "meas_level": cfg.physics.noise_meas,
            "meas_model": "additive gaussian per sample, sigma = level * rms(clean record)",
            "field_level": cfg.physics.noise_field,
            "field_model": "additive gaussian per half-grid node on observer fields, sigma = level * b0",
        },
        "record": {
            "samples": int(record.times.size),
            "rms_clean": float(np.sqrt(np.mean(record.clean_values**2))),
            "min_trajectory_eigenvalue": min_traj_eig,
        },
    }


def simulate_pipeline(cfg: ExperimentConfig):
    """Control + truth + record for one configuration (shared by commands)."""
    seeds = derived_seeds(cfg.physics.rng_seed)
    control, source = resolve_control(cfg, seeds)
    truth = resolve_truth(cfg, seeds)
    if truth is None:
        raise ValueError("simulation requires a truth_state")
    trajectory, record = simulate_truth(truth, control, cfg.physics)
    record = add_noise(record, cfg.physics.noise_meas, seeds.noise_meas)
    return seeds, control, source, truth, trajectory, record


# --------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    seeds, control, source, truth, trajectory, record = simulate_pipeline(cfg)
    min_eig = trajectory_min_eigenvalue(trajectory)
    metadata = build_metadata(cfg, control, source, truth, record, min_eig)

    record_path = out / "record.csv"
    if "record" in cfg.emit:
        write_record_csv(record, record_path)
    export_field_csv(control, out / "control.csv")
    with open(out / "metadata.json", "w") as fh:
        json.dump(metadata, fh, indent=2)

    return {
        "command": "simulate",
        "outputs": str(out),
        "record": str(record_path),
        "samples": int(record.times.size),
        "discriminant": metadata["control"]["discriminant"],
        "min_trajectory_eigenvalue": min_eig,
        "rms_clean": metadata["record"]["rms_clean"],
    }


def _load_run_inputs(cfg: ExperimentConfig, record_path):
    """Record + metadata from a simulate output; metadata wins over cfg for
    everything that defines the run (replay contract)."""
    record_path = Path(record_path)
    directory = record_path if record_path.is_dir() else record_path.parent
    record_file = directory / "record.csv" if record_path.is_dir() else record_path
    meta_file = directory / "metadata.json"
    if not meta_file.exists():
        raise ValueError(f"metadata.json not found next to {record_file}")
    with open(meta_file) as fh:
        metadata = json.load(fh)
    record = read_record_csv(record_file)
    physics = PhysicsConfig(**metadata["physics"])
    control = field_from_table(
        metadata["control"]["knot_times"],
        metadata["control"]["knot_phases"],
        metadata["control"]["b0"],
    )
    truth0 = metadata["truth_state"]
    truth0 = matrix_from_json(truth0) if truth0 is not None else None
    return record, metadata, physics, control, truth0


def cmd_estimate(cfg: ExperimentConfig, record_path) -> dict:
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    record, metadata, physics, control, truth0 = _load_run_inputs(cfg, record_path)
    n_iterations = cfg.n_iterations
    if n_iterations < 1:
        raise ValueError(f"n_iterations must be >= 1, got {n_iterations}")

    trajectory = None
    if truth0 is not None:
        trajectory, _ = simulate_truth(truth0, control, physics)

    t0 = time.perf_counter()
    run = run_bfn(record, control, physics, n_iterations, truth=trajectory)
    wall = time.perf_counter() - t0

    if "estimate" in cfg.emit:
        with open(out / "estimate.json", "w") as fh:
            json.dump(run_to_json(run), fh, indent=2)
    if run.vk_sequence is not None and "vk" in cfg.emit:
        write_series_csv(out / "vk.csv", ["k", "v"],
                         [np.arange(run.vk_sequence.size), run.vk_sequence])
    if run.z_trace is not None and "ztrace" in cfg.emit:
        write_series_csv(out / "ztrace.csv", ["t", "z", "v"],
                         [run.times_global, run.z_trace, run.v_trace])

    summary = {
        "command": "estimate",
        "outputs": str(out),
        "n_iterations": run.n_iterations,
        "final_surrogate_residual": float(run.surrogate_residuals[-1]),
        "min_eigenvalue_final": float(run.min_eigenvalue_trace[-1]),
        "fidelity": run.fidelity_vs_truth,
        "v_final": float(run.vk_sequence[-1]) if run.vk_sequence is not None else None,
        "wall_time_s": wall,
        "per_iteration_s": wall / run.n_iterations,
    }
    return summary


def cmd_validate(cfg: ExperimentConfig, record_path) -> dict:
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    record, metadata, physics, control, truth0 = _load_run_inputs(cfg, record_path)
    n_iterations = cfg.n_iterations
    if n_iterations < 1:
        raise ValueError(f"n_iterations must be >= 1, got {n_iterations}")

    response = build_response(control, physics)
    if "response" in cfg.emit:
        export_response_csv(response, out / "response.csv")

    report = {"command": "validate", "outputs": str(out)}
    try:
        inversion = reconstruct(record, response)
    except UnobservableControlError as exc:
        report["oracle"] = {
            "status": "unobservable",
            "failed_hypothesis": PRECONDITION_HYPOTHESIS,
            "discriminant": metadata["control"]["discriminant"],
            "rank": exc.rank,
            "expected_rank": exc.expected_rank,
        }
        return report

    trajectory = None
    if truth0 is not None:
        trajectory, _ = simulate_truth(truth0, control, physics)
    run = run_bfn(record, control, physics, n_iterations, truth=trajectory)

    distance = float(np.linalg.norm(inversion.estimate - run.final_estimate))
    report["oracle"] = {
        "status": "ok",
        "rank": inversion.rank,
        "condition_number": inversion.condition_number,
        "residual_norm": inversion.residual_norm,
        "estimate": matrix_to_json(inversion.estimate),
    }
    report["bfn_estimate"] = matrix_to_json(run.final_estimate)
    report["frobenius_distance"] = distance
    if truth0 is not None:
        report["oracle_fidelity_vs_truth"] = qops.fidelity(inversion.estimate, truth0)
        report["bfn_fidelity_vs_truth"] = run.fidelity_vs_truth
    with open(out / "validate.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return report


def _sweep_one(args) -> dict:
    base_json, seed = args
    cfg = config_from_json(base_json)
    cfg = dataclasses.replace(cfg, physics=cfg.physics.replace(rng_seed=seed))
    seeds, control, _, truth, trajectory, record = (
        simulate_pipeline(cfg)
    )
    t0 = time.perf_counter()
    run = run_bfn(record, control, cfg.physics, cfg.n_iterations, truth=trajectory)
    wall = time.perf_counter() - t0
    return {
        "seed": seed,
        "gamma_small": cfg.physics.gamma_small,
        "noise_meas": cfg.physics.noise_meas,
        "noise_field": cfg.physics.noise_field,
        "v0": float(run.vk_sequence[0]),
        "v_final": float(run.vk_sequence[-1]),
        "fidelity": run.fidelity_vs_truth,
        "envelope_decreasing": int(envelope_decreasing(run.vk_sequence)),
        "wall_time_s": wall,
    }


def cmd_sweep(cfg: ExperimentConfig, seed_list, workers: int = 1) -> dict:
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    base_json = config_to_json(cfg)
    jobs = [(base_json, seed) for seed in seed_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]

    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    fidelities = sorted(row["fidelity"] for row in rows)
    median = fidelities[len(fidelities) // 2] if len(fidelities) % 2 else 0.5 * (
        fidelities[len(fidelities) // 2 - 1] + fidelities[len(fidelities) // 2]
    )
    return {
        "command": "sweep",
        "outputs": str(sweep_path),
        "runs": len(rows),
        "median_fidelity": median,
        "envelope_decreasing_count": sum(r["envelope_decreasing"] for r in rows),
    }


# --------------------------------------------------------------------------
# Argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinbfn",
        description="Reconstruct the initial state of a continuously measured "
                    "spin system with back-and-forth nudging observers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, help="JSON experiment config")
        p.add_argument("--preset", choices=["paper-2level", "paper-spin1"])
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--iterations", type=int, help="back-and-forth iterations")
        p.add_argument("--noise-meas", type=float, help="measurement noise level")
        p.add_argument("--noise-field", type=float, help="field noise level")
        p.add_argument("--out", type=str, help="output directory")

    p_sim = sub.add_parser("simulate", help="simulate a record from a truth state")
    add_common(p_sim)

    p_est = sub.add_parser("estimate", help="run the nudging estimator on a record")
    add_common(p_est)
    p_est.add_argument("record", type=str, help="record.csv (metadata.json alongside) or its directory")

    p_val = sub.add_parser("validate", help="cross-check the estimator against linear inversion")
    add_common(p_val)
    p_val.add_argument("record", type=str)

    p_sweep = sub.add_parser("sweep", help="fan out independent runs over seeds")
    add_common(p_sweep)
    p_sweep.add_argument("--seeds", type=str, default="0:20",
                         help="seed range lo:hi (half-open) or comma list")
    p_sweep.add_argument("--workers", type=int, default=1)
    return parser


def resolve_experiment(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = config_from_json(json.load(fh))
        if args.preset:
            raise ValueError("give either --config or --preset, not both")
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        raise ValueError("one of --config or --preset is required")
    physics = cfg.physics
    if args.seed is not None:
        physics = physics.replace(rng_seed=args.seed)
    if args.noise_meas is not None:
        physics = physics.replace(noise_meas=args.noise_meas)
    if args.noise_field is not None:
        physics = physics.replace(noise_field=args.noise_field)
    cfg = dataclasses.replace(cfg, physics=physics)
    if args.iterations is not None:
        cfg = dataclasses.replace(cfg, n_iterations=args.iterations)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, outputs=args.out)
    return cfg


def parse_seed_list(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(s) for s in text.split(",") if s]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_experiment(args)
        if args.command == "simulate":
            summary = cmd_simulate(cfg)
        elif args.command == "estimate":
            summary = cmd_estimate(cfg, args.record)
        elif args.command == "validate":
            summary = cmd_validate(cfg, args.record)
        elif args.command == "sweep":
            summary = cmd_sweep(cfg, parse_seed_list(args.seeds), workers=args.workers)
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {args.command}")
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except ControlSamplingError as exc:
        print(f"error: control sampling exhausted: {exc}", file=sys.stderr)
        return EXIT_SAMPLING_EXHAUSTED
    except GridMismatchError as exc:
        print(f"error: grid mismatch: {exc}", file=sys.stderr)
        return EXIT_GRID_MISMATCH
    except BlowupError as exc:
        print(f"error: observer blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except IntegrationError as exc:
        print(f"error: integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION_FAILURE
    json.dump(summary, sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
