"""Counts and ideal-probability files.

Both are JSON documents carrying ``format`` and ``version`` fields.  A file
holds either one record object or ``{"format": ..., "version": ...,
"records": [...]}``.  Bitstrings follow the simulator's bit order: the
rightmost character is qubit 0.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .circuitgen import Circuit, CircuitFormatError, parse_circuit
from .simcore import ideal_probabilities

COUNTS_FORMAT = "bogkit.counts"
IDEAL_FORMAT = "bogkit.ideal"
RECORD_VERSION = 1

_BITS = re.compile(r"^[01]+$")


class RecordError(ValueError):
    """A counts or ideal-probability record failed validation."""


@dataclass(frozen=True)
class CountsRecord:
    n_qubits: int
    depth: int
    seed: int
    shots: int
    counts: dict[str, int]

    def validate(self, where: str = "record") -> None:
        for b, c in self.counts.items():
            if len(b) != self.n_qubits or not _BITS.match(b):
                raise RecordError(
                    f"{where}: bitstring {b!r} is not a {self.n_qubits}-qubit bitstring "
                    f"(length {len(b)})"
                )
            if not isinstance(c, (int, np.integer)) or isinstance(c, bool) or c < 0:
                raise RecordError(f"{where}: count for {b!r} must be a nonnegative integer, got {c!r}")
        total = sum(self.counts.values())
        if total != self.shots:
            raise RecordError(f"{where}: counts sum to {total} but shots = {self.shots}")

    def vector(self) -> np.ndarray:
        """Counts indexed by basis state."""
        v = np.zeros(2**self.n_qubits, dtype=np.int64)
        for b, c in self.counts.items():
            v[int(b, 2)] = c
        return v

    def frequencies(self) -> np.ndarray:
        return self.vector() / self.shots

    def to_obj(self) -> dict:
        return {
            "format": COUNTS_FORMAT,
            "version": RECORD_VERSION,
            "n_qubits": self.n_qubits,
            "depth": self.depth,
            "seed": self.seed,
            "shots": self.shots,
            "counts": dict(sorted(self.counts.items())),
        }

    @classmethod
    def from_vector(cls, n_qubits: int, depth: int, seed: int, counts: np.ndarray) -> "CountsRecord":
        d = {format(i, f"0{n_qubits}b"): int(c) for i, c in enumerate(counts) if c}
        return cls(n_qubits, depth, seed, int(np.sum(counts)), d)


@dataclass(frozen=True)
class IdealRecord:
    n_qubits: int
    depth: int
    seed: int
    probs: np.ndarray

    def to_obj(self) -> dict:
        return {
            "format": IDEAL_FORMAT,
            "version": RECORD_VERSION,
            "n_qubits": self.n_qubits,
            "depth": self.depth,
            "seed": self.seed,
            "probs": [float(p) for p in self.probs],
        }


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_records(records: Sequence, path: str | Path) -> Path:
    """Write records of one kind to a single file."""
    path = Path(path)
    if not records:
        raise RecordError("nothing to write")
    fmt = COUNTS_FORMAT if isinstance(records[0], CountsRecord) else IDEAL_FORMAT
    body = {"format": fmt, "version": RECORD_VERSION, "records": [r.to_obj() for r in records]}
    path.write_text(_dump(body))
    return path


def write_record(record, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(_dump(record.to_obj()))
    return path


def _load(path: Path, fmt: str) -> list[tuple[str, dict]]:
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RecordError(f"{path}: parse error at offset {exc.pos}: {exc.msg}") from None
    if not isinstance(obj, dict) or obj.get("format") != fmt:
        raise RecordError(f"{path}: not a {fmt} file")
    if obj.get("version") != RECORD_VERSION:
        raise RecordError(f"{path}: unsupported version {obj.get('version')!r}; expected {RECORD_VERSION}")
    if "records" in obj:
        return [(f"{path}[{i}]", r) for i, r in enumerate(obj["records"])]
    return [(str(path), obj)]


def _field(obj: dict, name: str, where: str):
    try:
        return obj[name]
    except KeyError:
        raise RecordError(f"{where}: missing field {name!r}") from None


def ingest_counts(paths: Iterable[str | Path]) -> list[CountsRecord]:
    """Load and validate counts files; sorted by (depth, seed)."""
    out = []
    for p in paths:
        for where, obj in _load(Path(p), COUNTS_FORMAT):
            rec = CountsRecord(
                n_qubits=int(_field(obj, "n_qubits", where)),
                depth=int(_field(obj, "depth", where)),
                seed=int(_field(obj, "seed", where)),
                shots=int(_field(obj, "shots", where)),
                counts=dict(_field(obj, "counts", where)),
            )
            rec.validate(where)
            out.append(rec)
    if out and len({r.n_qubits for r in out}) != 1:
        raise RecordError("records disagree on n_qubits")
    keys = [(r.depth, r.seed) for r in out]
    if len(set(keys)) != len(keys):
        raise RecordError("duplicate (depth, seed) records")
    return sorted(out, key=lambda r: (r.depth, r.seed))


def load_ideals(paths: Iterable[str | Path]) -> dict[tuple[int, int], np.ndarray]:
    """Ideal probabilities keyed by (seed, depth)."""
    out = {}
    for p in paths:
        for where, obj in _load(Path(p), IDEAL_FORMAT):
            probs = np.asarray(_field(obj, "probs", where), dtype=float)
            n = int(_field(obj, "n_qubits", where))
            if probs.shape != (2**n,):
                raise RecordError(f"{where}: expected {2**n} probabilities, got {probs.shape[0]}")
            out[(int(_field(obj, "seed", where)), int(_field(obj, "depth", where)))] = probs
    return out


def load_circuits(paths: Iterable[str | Path]) -> dict[int, Circuit]:
    out = {}
    for p in paths:
        try:
            c = parse_circuit(Path(p).read_bytes())
        except CircuitFormatError as exc:
            raise RecordError(f"{p}: {exc}") from None
        out[c.seed] = c
    return out


def ideals_for(records: Sequence[CountsRecord], ideals=None, circuits=None) -> dict[tuple[int, int], np.ndarray]:
    """Ideal probabilities for every record, from precomputed files or circuits.

    Raises RecordError naming the first record that has neither.
    """
    ideals = dict(ideals or {})
    circuits = circuits or {}
    out = {}
    for r in records:
        key = (r.seed, r.depth)
        if key in ideals:
            out[key] = ideals[key]
        elif r.seed in circuits and circuits[r.seed].cycles >= r.depth:
            out[key] = ideal_probabilities(circuits[r.seed].prefix(r.depth)).probs
        else:
            raise RecordError(f"no ideal probabilities for seed={r.seed} depth={r.depth} (needed for ByIdeal)")
    return out
