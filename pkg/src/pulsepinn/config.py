"""Run configuration: validation, JSON round trip and environment overrides."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import ACTIVATIONS, INIT_SCHEMES
from .system import GATE_NAMES

MODELS = ("schrodinger", "lindblad")
SEED_ENV = "PULSEPINN_SEED"


@dataclass
class RunConfig:
    model: str = "schrodinger"
    gate: str = "cnot"
    theta: float = math.pi
    gamma_abs: float = 0.0
    gamma_em: float = 0.0
    omega0: float = 1.0
    activation: str = "sin"
    init: str = "custom"
    epochs: int = 5000
    lr: float = 1e-6
    n_steps: int = 200
    t_final: float = 10.0
    seed: int = 0
    x0_override: list | None = None  # 4 complex numbers, as [re, im] pairs in JSON
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    out_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}, got {self.model!r}")
        if self.gate not in GATE_NAMES:
            raise ConfigError("gate", f"must be one of {GATE_NAMES}, got {self.gate!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError("activation", f"must be one of {ACTIVATIONS}")
        if self.init not in INIT_SCHEMES:
            raise ConfigError("init", f"must be one of {INIT_SCHEMES}")
        for name in ("gamma_abs", "gamma_em"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(name, f"must be a finite rate >= 0, got {value}")
        if not self.omega0 > 0:
            raise ConfigError("omega0", "must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        if not self.lr > 0:
            raise ConfigError("lr", "must be positive")
        if self.n_steps < 2:
            raise ConfigError("n_steps", "must be >= 2")
        if not self.t_final > 0:
            raise ConfigError("t_final", "must be positive")
        if len(self.loss_weights) != 3:
            raise ConfigError("loss_weights", "needs exactly three values")
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if self.x0_override is not None:
            x0 = parse_state(self.x0_override)
            if abs(np.linalg.norm(x0) - 1.0) > 1e-9:
                raise ConfigError("x0_override", f"must have unit norm, got {np.linalg.norm(x0):.6g}")

    @property
    def x0(self) -> np.ndarray | None:
        return None if self.x0_override is None else parse_state(self.x0_override)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["loss_weights"] = list(self.loss_weights)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        return cls.from_dict(doc)

    def with_env(self, environ=None) -> "RunConfig":
        """Apply the seed override from the environment, if set."""
        environ = os.environ if environ is None else environ
        raw = environ.get(SEED_ENV)
        if raw is None or raw == "":
            return self
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError("seed", f"{SEED_ENV}={raw!r} is not an integer") from exc
        return dataclasses.replace(self, seed=seed)


def parse_state(raw) -> np.ndarray:
    """Accept [[re, im], ...], plain numbers, or complex literals like '0.7+0.7j'."""
    try:
        values = []
        for item in raw:
            if isinstance(item, (list, tuple)):
                re, im = item
                values.append(complex(float(re), float(im)))
            else:
                values.append(complex(item))
    except (TypeError, ValueError) as exc:
        raise ConfigError("x0_override", f"cannot parse state: {exc}") from exc
    if len(values) != 4:
        raise ConfigError("x0_override", "needs exactly four amplitudes")
    return np.array(values, dtype=complex)


@dataclass
class SweepConfig:
    """A grid of runs; every combination of the list fields is trained."""
    base: RunConfig = field(default_factory=RunConfig)
    gates: list | None = None
    gammas: list | None = None
    omega0s: list | None = None
    activations: list | None = None
    seeds: list | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        doc = dict(doc)
        base = RunConfig.from_dict(doc.pop("base", {}))
        known = {"gates", "gammas", "omega0s", "activations", "seeds"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown sweep field")
        return cls(base=base, **{k: list(v) for k, v in doc.items()})

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("sweep", f"cannot read {path}: {exc}") from exc
        return cls.from_dict(doc)

    def expand(self) -> list[RunConfig]:
        b = self.base
        axes = {"gates": [b.gate], "gammas": [b.gamma_abs], "omega0s": [b.omega0],
                "activations": [b.activation], "seeds": [b.seed]}
        for name in axes:
            given = getattr(self, name)
            if given is not None:
                if len(given) == 0:
                    raise ConfigError(name, "empty grid axis")
                axes[name] = given
        gates, gammas, omegas, acts, seeds = axes.values()
        runs = []
        for gate in gates:
            for gamma in gammas:
                for omega0 in omegas:
                    for act in acts:
                        for seed in seeds:
                            runs.append(dataclasses.replace(
                                b, gate=gate, gamma_abs=float(gamma), gamma_em=float(gamma),
                                omega0=float(omega0), activation=act, seed=int(seed)))
        return runs
