"""Experiment configuration and its validation."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bogmetric import Algorithm, Reference, statistics_warnings
from .simcore import MIXED_QUBIT_CAP, NoiseModel


class ConfigError(ValueError):
    """Invalid experiment configuration."""


ALGORITHM_CHOICES = ("ByIdeal", "ByExperimental", "both")


def _shots_in(v):
    if v is None or (isinstance(v, str) and v.lower() in ("inf", "infinite")):
        return math.inf
    if isinstance(v, float) and math.isinf(v):
        return math.inf
    return v


def _shots_out(v):
    return "inf" if math.isinf(v) else int(v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one simulated BOG experiment.

    ``shots = inf`` selects infinite-shot mode, where exact output
    probabilities are analysed directly.  ``readout_error`` is a symmetric
    flip probability, either one value for all qubits or one per qubit.
    ``final_flip`` applies X to every qubit before measurement in the
    experimental circuit only.
    """

    n_qubits: int
    depths: tuple[int, ...]
    seeds: int
    shots: float = 1000
    num_bins: int = 10
    master_seed: int = 0
    depolarizing: float = 0.0
    readout_error: float | tuple[float, ...] = 0.0
    idle_depolarizing: float = 0.0
    z_fraction: float = 0.0
    zz_strength_hz: float = 0.0
    cnot_time_s: float = 443.73e-9
    bootstrap_groups: int = 1
    algorithms: str = "both"
    experimental_reference: str = "auto"
    per_seed_fidelity: bool = False
    final_flip: bool = False

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "shots", _shots_in(self.shots))
        if isinstance(self.readout_error, (list, tuple)):
            object.__setattr__(self, "readout_error", tuple(float(e) for e in self.readout_error))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n_qubits, int) or self.n_qubits < 2:
            raise ConfigError(f"n_qubits must be an integer >= 2, got {self.n_qubits!r}")
        if self.n_qubits > MIXED_QUBIT_CAP:
            raise ConfigError(f"n_qubits={self.n_qubits} exceeds the mixed-state cap of {MIXED_QUBIT_CAP}")
        if not self.depths:
            raise ConfigError("depths must be nonempty")
        if any(d < 0 for d in self.depths):
            raise ConfigError("depths must be nonnegative")
        if any(b <= a for a, b in zip(self.depths, self.depths[1:])):
            raise ConfigError(f"depths must be strictly ascending, got {list(self.depths)}")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if not (math.isinf(self.shots) or (float(self.shots).is_integer() and self.shots >= 1)):
            raise ConfigError(f"shots must be a positive integer or 'inf', got {self.shots!r}")
        if self.num_bins < 2:
            raise ConfigError("num_bins must be >= 2")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        for name in ("depolarizing", "idle_depolarizing"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        errs = self.readout_error if isinstance(self.readout_error, tuple) else (self.readout_error,)
        if isinstance(self.readout_error, tuple) and len(errs) != self.n_qubits:
            raise ConfigError(f"readout_error needs {self.n_qubits} entries, got {len(errs)}")
        if any(not 0.0 <= e <= 1.0 for e in errs):
            raise ConfigError("readout_error values must lie in [0, 1]")
        for name in ("z_fraction", "zz_strength_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.cnot_time_s > 0:
            raise ConfigError("cnot_time_s must be positive")
        if not 1 <= self.bootstrap_groups <= self.seeds:
            raise ConfigError(f"bootstrap_groups must lie in [1, seeds={self.seeds}], got {self.bootstrap_groups}")
        if self.algorithms not in ALGORITHM_CHOICES:
            raise ConfigError(f"algorithms must be one of {ALGORITHM_CHOICES}, got {self.algorithms!r}")
        try:
            Reference(self.experimental_reference)
        except ValueError:
            raise ConfigError(f"unknown experimental_reference {self.experimental_reference!r}") from None
        from .bogmetric import BinningError, compute_bin_edges

        try:
            compute_bin_edges(self.n_qubits, self.num_bins)
        except BinningError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def algorithm_list(self) -> tuple[Algorithm, ...]:
        if self.algorithms == "both":
            return (Algorithm.BY_IDEAL, Algorithm.BY_EXPERIMENTAL)
        return (Algorithm(self.algorithms),)

    @property
    def infinite_shots(self) -> bool:
        return math.isinf(self.shots)

    def warnings(self) -> list[str]:
        return statistics_warnings(self.n_qubits, self.seeds, self.num_bins, self.shots, self.algorithm_list)

    def noise_model(self) -> NoiseModel:
        errs = self.readout_error if isinstance(self.readout_error, tuple) else (self.readout_error,) * self.n_qubits
        readout = None
        if any(e > 0 for e in errs):
            readout = tuple(np.array([[1 - e, e], [e, 1 - e]]) for e in errs)
        return NoiseModel(
            depolarizing=self.depolarizing,
            readout=readout,
            idle_depolarizing=self.idle_depolarizing,
            z_angle=2 * math.pi * self.z_fraction,
            zz_angle=2 * math.pi * self.zz_strength_hz * self.cnot_time_s,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["depths"] = list(self.depths)
        d["shots"] = _shots_out(self.shots)
        if isinstance(self.readout_error, tuple):
            d["readout_error"] = list(self.readout_error)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"n_qubits", "depths", "seeds"} - set(d)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: parse error at offset {exc.pos}: {exc.msg}") from None
        return cls.from_dict(d)


def two_qubit_replica(**overrides) -> ExperimentConfig:
    """Two-qubit protocol: 90 seeds, 1000 shots, 10 bins, depths up to 270 cycles."""
    base = dict(
        n_qubits=2,
        depths=(1, 10, 20, 30, 45, 60, 80, 100, 130, 160, 200, 235, 270),
        seeds=90,
        shots=1000,
        num_bins=10,
        bootstrap_groups=10,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def six_qubit_replica(**overrides) -> ExperimentConfig:
    """Six-qubit protocol: 40 seeds, 8000 shots, 30 bins, evenly spaced depths."""
    base = dict(
        n_qubits=6,
        depths=tuple(range(2, 41, 2)),
        seeds=40,
        shots=8000,
        num_bins=30,
        bootstrap_groups=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base)
