"""Command-line interface: ``pulsepinn {train,validate,sweep,diagnose}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .config import RunConfig, SweepConfig
from .errors import ConfigError, MissingArtifact, PulsePinnError
from .model import diagnostics
from .system import build_collapse_ops, build_system, gate_target
from .trainer import Problem, TrainingAborted, sweep, train
from .validator import build_spline, crosscheck, rk4_lindblad, rk4_schrodinger

log = logging.getLogger("pulsepinn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_FIELD_TYPES = {
    "model": str, "gate": str, "theta": float, "gamma_abs": float, "gamma_em": float,
    "omega0": float, "activation": str, "init": str, "epochs": int, "lr": float,
    "n_steps": int, "t_final": float, "seed": int, "out_dir": str,
}


def _add_run_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="JSON RunConfig; flags override its fields")
    for name, kind in _FIELD_TYPES.items():
        parser.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)
    parser.add_argument("--x0-override", dest="x0_override", nargs=4, default=None,
                        metavar="AMP", help="four complex amplitudes, e.g. 0.7071 0 0.7071j 0")
    parser.add_argument("--loss-weights", dest="loss_weights", nargs=3, type=float, default=None)


def _run_config(args) -> RunConfig:
    doc = {}
    if args.config is not None:
        doc = RunConfig.load(args.config).to_dict()
    for name in list(_FIELD_TYPES) + ["x0_override", "loss_weights"]:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    return RunConfig.from_dict(doc).with_env()


def _default_out_dir(cfg: RunConfig) -> Path:
    return Path("runs") / f"{cfg.model}-{cfg.gate}-seed{cfg.seed}"


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = Path(cfg.out_dir) if cfg.out_dir else _default_out_dir(cfg)
    try:
        record = train(cfg, progress_every=args.log_every)
    except TrainingAborted as exc:
        artifacts.write_run(exc.record, out)
        log.error("%s (partial run written to %s)", exc, out)
        return EXIT_NUMERIC
    artifacts.write_run(record, out)
    print(f"{out}: final fidelity {record.final_fidelity:.8f} in {record.wall_clock_s:.1f}s")
    return EXIT_OK


def validate_run(run_dir, paired=None, substeps: int = 10) -> dict:
    """Re-simulate a run's pulses and write ``validation/`` into the run directory."""
    run_dir = Path(run_dir)
    cfg = artifacts.load_config(run_dir)
    _, samples = artifacts.load_controls(run_dir)
    grid = artifacts.grid_for(cfg)
    schedule = build_spline(samples, grid)
    problem = Problem(cfg)
    x0 = problem.x0
    target = gate_target(cfg.gate, cfg.theta).matrix.to_complex()
    system = build_system(cfg.gamma_abs, cfg.gamma_em)
    if cfg.model == "lindblad":
        collapse = build_collapse_ops(cfg.gamma_abs, cfg.gamma_em)
        result = rk4_lindblad(system, schedule, np.outer(x0, x0.conj()), collapse, substeps, target=target)
    else:
        result = rk4_schrodinger(system, schedule, x0, substeps, target=target)
    report = {
        "state_fidelity": result.target_fidelity,
        "final_populations": dict(zip(artifacts.POPULATIONS_HEADER[1:], result.populations[-1].tolist())),
        "max_norm_deviation": result.max_norm_deviation,
        "min_eigenvalue": result.min_eigenvalue,
        "substeps": substeps,
    }
    if paired is not None:
        p_cfg = artifacts.load_config(paired)
        _, p_samples = artifacts.load_controls(paired)
        p_schedule = build_spline(p_samples, artifacts.grid_for(p_cfg))
        report["paired_run"] = str(paired)
        report["crosscheck_fidelity"] = crosscheck(schedule, p_schedule, x0, build_system(), substeps)
    out = run_dir / "validation"
    artifacts.write_csv(out / "populations.csv", artifacts.POPULATIONS_HEADER,
                        [[t, *p] for t, p in zip(result.times, result.populations)])
    artifacts.write_json(out / "report.json", report)
    return report


def cmd_validate(args) -> int:
    report = validate_run(args.run_dir, args.paired, args.substeps)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _run_name(cfg: RunConfig) -> str:
    return (f"{cfg.model}-{cfg.gate}-g{artifacts.fmt(cfg.gamma_abs)}-w{artifacts.fmt(cfg.omega0)}"
            f"-{cfg.activation}-s{cfg.seed}")


def cmd_sweep(args) -> int:
    grid_cfg = SweepConfig.load(args.sweep_config)
    configs = grid_cfg.expand()
    out = Path(args.out_dir)
    configs = [dataclasses.replace(c, out_dir=str(out / "runs" / _run_name(c))).with_env() for c in configs]
    workers = args.workers or (os.cpu_count() or 1)
    records = sweep(configs, workers=workers)
    for r in records:
        artifacts.write_run(r, r.config.out_dir)
    artifacts.write_summary(out / "summary.csv", records)
    failed = sum(r.status != "ok" for r in records)
    print(f"{len(records)} runs, {failed} failed; summary in {out / 'summary.csv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _run_config(args)
    problem = Problem(cfg)
    layers = diagnostics(problem.new_model(), problem.grid)
    out = Path(cfg.out_dir) if cfg.out_dir else Path("diagnostics")
    artifacts.write_diagnostics(out, layers, problem.grid)
    for layer in layers:
        print(f"{layer.name}: gradient std {layer.gradient_std:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsepinn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one pulse network")
    _add_run_flags(p)
    p.add_argument("--log-every", type=int, default=0, help="log progress every N epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("validate", help="re-simulate a run's pulses with RK4")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--paired", type=Path, default=None, help="second run for the closed/open crosscheck")
    p.add_argument("--substeps", type=int, default=10)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="train a grid of configurations")
    p.add_argument("sweep_config", type=Path)
    p.add_argument("--out-dir", type=Path, default=Path("sweep"))
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="initialization diagnostics of an untrained network")
    _add_run_flags(p)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PulsePinnError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
