"""On-disk run directories: writers and readers for every artifact file.

All floats are written with 17 significant digits so that a run directory
round-trips exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import MissingArtifact
from .model import LayerDiagnostics, PinnModel, TimeGrid
from .trainer import TrainRecord

LOSS_HEADER_CLOSED = ["epoch", "l_total", "l_model", "l_fid", "fidelity"]
LOSS_HEADER_OPEN = ["epoch", "l_total", "l_model", "l_fid", "l_trace", "fidelity"]
CONTROLS_HEADER = ["t", "u1", "u2", "u3", "u4"]
POPULATIONS_HEADER = ["t", "p00", "p01", "p10", "p11"]
SUMMARY_HEADER = ["gate", "gamma", "omega0", "activation", "seed", "final_fidelity", "wall_clock_s", "status"]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]) if body else np.zeros((0, len(header)))
    return header, data


def write_json(path: Path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def versions() -> dict:
    return {"pulsepinn": __version__, "numpy": np.__version__, "python": platform.python_version()}


def write_run(record: TrainRecord, out_dir) -> Path:
    """Write every artifact of a (possibly partial) run into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = record.config
    write_json(out / "config.json", cfg.to_dict())
    open_model = cfg.model == "lindblad"
    header = LOSS_HEADER_OPEN if open_model else LOSS_HEADER_CLOSED
    rows = []
    for e in record.history:
        row = [e.epoch, e.l_total, e.l_model, e.l_fid] + ([e.l_trace] if open_model else []) + [e.fidelity]
        rows.append(row)
    write_csv(out / "loss_curve.csv", header, rows)
    if record.controls is not None:
        write_csv(out / "controls.csv", CONTROLS_HEADER,
                  [[t, *u] for t, u in zip(record.times, record.controls)])
        pops = np.abs(record.states) ** 2
        write_csv(out / "populations.csv", POPULATIONS_HEADER,
                  [[t, *p] for t, p in zip(record.times, pops)])
    if record.final_operator is not None:
        op = record.final_operator
        write_json(out / "final_operator.json", {
            "kind": "channel" if open_model else "propagator",
            "real": op.real.tolist(), "imag": op.imag.tolist()})
    if record.model is not None:
        record.model.save(out / "weights.json")
    report = {
        "status": record.status,
        "error": record.error,
        "epochs_completed": len(record.history),
        "final_fidelity": record.final.fidelity if record.final else None,
        "final_losses": None if record.final is None else {
            "l_total": record.final.l_total, "l_model": record.final.l_model,
            "l_fid": record.final.l_fid, "l_trace": record.final.l_trace},
        "seed": cfg.seed,
        "versions": versions(),
    }
    write_json(out / "report.json", report)
    # timing lives apart from report.json so identical runs stay byte-identical
    write_json(out / "timing.json", {"wall_clock_s": record.wall_clock_s})
    return out


def require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path}")
    return path


def load_config(run_dir) -> RunConfig:
    return RunConfig.load(require(Path(run_dir) / "config.json"))


def load_controls(run_dir) -> tuple[np.ndarray, np.ndarray]:
    header, data = read_csv(require(Path(run_dir) / "controls.csv"))
    if header != CONTROLS_HEADER:
        raise MissingArtifact(f"unexpected controls.csv header {header}")
    return data[:, 0], data[:, 1:]


def load_weights(run_dir) -> PinnModel:
    return PinnModel.load(require(Path(run_dir) / "weights.json"))


def grid_for(cfg: RunConfig) -> TimeGrid:
    return TimeGrid(cfg.n_steps, cfg.t_final)


def write_summary(path: Path, records: list[TrainRecord]):
    rows = []
    for r in records:
        c = r.config
        rows.append([c.gate, c.gamma_abs, c.omega0, c.activation, c.seed,
                     r.final.fidelity if r.final else None, r.wall_clock_s, r.status])
    write_csv(path, SUMMARY_HEADER, rows)


def write_diagnostics(out_dir, layers: list[LayerDiagnostics], grid: TimeGrid) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    freqs = np.fft.rfftfreq(grid.n, d=grid.dt)
    for layer in layers:
        kinds = {"linear": layer.linear_hist, "activation": layer.activation_hist,
                 "gradient": layer.gradient_hist}
        for kind, hist in kinds.items():
            if hist is None:
                continue
            counts, edges = hist
            write_csv(out / f"{layer.name}_{kind}_hist.csv", ["bin_left", "bin_right", "count"],
                      [[lo, hi, int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)])
        write_csv(out / f"{layer.name}_spectrum.csv", ["frequency", "magnitude"],
                  [[f, m] for f, m in zip(freqs, layer.spectrum)])
    return out
