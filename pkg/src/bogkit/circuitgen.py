"""Hardware-efficient random circuits on a linear qubit chain.

A cycle is one layer of Haar-random single-qubit rotations on every qubit
followed by one layer of CNOTs on alternating nearest-neighbour pairs.
Coherent noise can be injected after each entangling layer as explicit
phase layers; those are flagged as noise so they never count as gates.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .simcore import SimulationError, TwoQubitGate, _check_unitary, _layer_kron, haar_random_su2

FORMAT_NAME = "bogkit.circuit"
FORMAT_VERSION = 1


class CircuitFormatError(ValueError):
    """Malformed or incompatible serialized circuit."""


class CircuitVersionError(CircuitFormatError):
    pass


@dataclass(frozen=True)
class Topology:
    qubit_count: int
    odd_pairs: tuple[tuple[int, int], ...]
    even_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for pairs in (self.odd_pairs, self.even_pairs):
            seen: set[int] = set()
            for a, b in pairs:
                if not (0 <= a < self.qubit_count and 0 <= b < self.qubit_count) or a == b:
                    raise SimulationError(f"invalid pair {(a, b)} for {self.qubit_count} qubits")
                if a in seen or b in seen:
                    raise SimulationError("pairs within one cycle parity must be disjoint")
                seen.update((a, b))

    def pairs_for_cycle(self, cycle: int) -> tuple[tuple[int, int], ...]:
        """Pairs entangled on ``cycle`` (1-based).  Every cycle uses the odd
        pairing when there is no even pairing (two-qubit chain)."""
        if cycle % 2 == 1 or not self.even_pairs:
            return self.odd_pairs
        return self.even_pairs


def chain_topology(m: int) -> Topology:
    """Alternating pairings of an ``m``-qubit linear chain."""
    if m < 2:
        raise SimulationError("a chain needs at least 2 qubits")
    odd = tuple((i, i + 1) for i in range(0, m - 1, 2))
    even = tuple((i, i + 1) for i in range(1, m - 1, 2))
    return Topology(m, odd, even)


@dataclass(frozen=True)
class SingleQubitLayer:
    unitaries: tuple[np.ndarray, ...]

    noise = False

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        """Full-register unitary of the layer (computed once)."""
        return _layer_kron(self.unitaries)

    def __post_init__(self):
        for u in self.unitaries:
            if np.shape(u) != (2, 2):
                raise SimulationError(f"single-qubit unitaries must be 2x2, got shape {np.shape(u)}")
            _check_unitary(np.asarray(u))


@dataclass(frozen=True)
class EntanglingLayer:
    gates: tuple[TwoQubitGate, ...]

    noise = False


@dataclass(frozen=True)
class PhaseInjectionLayer:
    """Virtual Z rotations and ZZ phases modelling coherent gate error."""

    z_rotations: tuple[tuple[int, float], ...] = ()
    zz_rotations: tuple[tuple[tuple[int, int], float], ...] = ()

    noise = True

    def __post_init__(self):
        angles = [a for _, a in self.z_rotations] + [a for _, a in self.zz_rotations]
        if not all(np.isfinite(a) for a in angles):
            raise SimulationError("injection angles must be finite")


Layer = Union[SingleQubitLayer, EntanglingLayer, PhaseInjectionLayer]


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    seed: int
    cycles: int
    layers: tuple[Layer, ...]

    def __post_init__(self):
        for layer in self.layers:
            if isinstance(layer, SingleQubitLayer) and len(layer.unitaries) != self.n_qubits:
                raise SimulationError(
                    f"single-qubit layer has {len(layer.unitaries)} unitaries for {self.n_qubits} qubits"
                )
            if isinstance(layer, EntanglingLayer):
                for g in layer.gates:
                    if max(g.qubits) >= self.n_qubits or min(g.qubits) < 0:
                        raise SimulationError(f"gate on {g.qubits} outside {self.n_qubits} qubits")

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return serialize_circuit(self) == serialize_circuit(other)

    def __hash__(self):
        return hash(serialize_circuit(self))

    def cycle_ends(self) -> frozenset[int]:
        """Layer indices after which a cycle is complete.

        An entangling layer closes its cycle, unless injection layers follow
        it, in which case the last of those does.
        """
        ends = set()
        for i, layer in enumerate(self.layers):
            if isinstance(layer, EntanglingLayer):
                j = i
                while j + 1 < len(self.layers) and isinstance(self.layers[j + 1], PhaseInjectionLayer):
                    j += 1
                ends.add(j)
        return frozenset(ends)

    def prefix(self, cycles: int) -> "Circuit":
        """The first ``cycles`` cycles of this circuit."""
        if not 0 <= cycles <= self.cycles:
            raise ValueError(f"prefix length {cycles} outside [0, {self.cycles}]")
        ends = sorted(self.cycle_ends())
        cut = 0 if cycles == 0 else ends[cycles - 1] + 1
        return Circuit(self.n_qubits, self.seed, cycles, self.layers[:cut])

    def gate_count(self) -> int:
        """Number of entangling gates; injection layers are not gates."""
        return sum(len(l.gates) for l in self.layers if isinstance(l, EntanglingLayer))

    def unitary(self) -> np.ndarray:
        """Full circuit unitary by explicit composition (small n only)."""
        from .simcore import _apply_to_vector, rz, zz_phase

        n = self.n_qubits
        d = 2**n
        u = np.eye(d, dtype=complex)
        cols = [u[:, j].copy() for j in range(d)]
        for layer in self.layers:
            for j in range(d):
                psi = cols[j]
                if isinstance(layer, SingleQubitLayer):
                    for q, m in enumerate(layer.unitaries):
                        psi = _apply_to_vector(psi, m, (q,), n)
                elif isinstance(layer, EntanglingLayer):
                    for g in layer.gates:
                        psi = _apply_to_vector(psi, g.unitary(), g.qubits, n)
                else:
                    for q, a in layer.z_rotations:
                        psi = _apply_to_vector(psi, rz(a), (q,), n)
                    for pair, a in layer.zz_rotations:
                        psi = _apply_to_vector(psi, zz_phase(a), pair, n)
                cols[j] = psi
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class InjectionSpec:
    """Coherent-noise injection parameters.

    Args:
        z_fraction: Z rotation per gated qubit, as a fraction of 2π.
        zz_strength_hz: static ZZ coupling J in Hz.
        cnot_time_s: duration of one CNOT in seconds.
    """

    z_fraction: float = 0.0
    zz_strength_hz: float = 0.0
    cnot_time_s: float = 443.73e-9

    def __post_init__(self):
        if not np.isfinite(self.zz_angle) or not np.isfinite(self.z_angle):
            raise SimulationError("injection angles must be finite")

    @property
    def z_angle(self) -> float:
        return 2 * np.pi * self.z_fraction

    @property
    def zz_angle(self) -> float:
        return 2 * np.pi * self.zz_strength_hz * self.cnot_time_s


def _cycle_rng(seed: int, cycle: int, qubit: int) -> np.random.Generator:
    # Independent stream per (cycle, qubit): deeper circuits extend shallower ones.
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(cycle, qubit)))


def generate_bog_circuit(m: int, cycles: int, seed: int, topology: Topology | None = None) -> Circuit:
    """Random BOG circuit with ``cycles`` (single-qubit layer, CNOT layer) cycles.

    The depth-``d`` circuit for a seed is a prefix of every deeper circuit
    for the same seed.
    """
    if cycles < 0:
        raise SimulationError("cycles must be nonnegative")
    if topology is None:
        topology = chain_topology(m)
    if topology.qubit_count != m:
        raise SimulationError(f"topology has {topology.qubit_count} qubits, circuit has {m}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise SimulationError("seed must be a 64-bit unsigned integer")
    layers: list[Layer] = []
    for c in range(1, cycles + 1):
        layers.append(SingleQubitLayer(tuple(haar_random_su2(_cycle_rng(seed, c, q)) for q in range(m))))
        layers.append(EntanglingLayer(tuple(TwoQubitGate(a, b) for a, b in topology.pairs_for_cycle(c))))
    return Circuit(m, seed, cycles, tuple(layers))


def _inject(circuit: Circuit, make_layer) -> Circuit:
    out: list[Layer] = []
    ends = circuit.cycle_ends()
    last_ent = None
    for i, layer in enumerate(circuit.layers):
        out.append(layer)
        if isinstance(layer, EntanglingLayer):
            last_ent = layer
        if i in ends and last_ent is not None:
            new = make_layer(last_ent)
            if new is not None:
                out.append(new)
    return Circuit(circuit.n_qubits, circuit.seed, circuit.cycles, tuple(out))


def inject_z_noise(circuit: Circuit, z_fraction: float) -> Circuit:
    """Append Rz(2π·z_fraction) on both qubits of every gated pair after each CNOT layer."""
    angle = 2 * np.pi * z_fraction

    def layer(ent: EntanglingLayer):
        rots = tuple((q, angle) for g in ent.gates for q in g.qubits)
        return PhaseInjectionLayer(z_rotations=rots)

    return _inject(circuit, layer)


def inject_zz(circuit: Circuit, spec: InjectionSpec) -> Circuit:
    """Append exp(-iθ/2 Z⊗Z), θ = 2π·J·t, on every gated pair after each CNOT layer."""
    if spec.cnot_time_s <= 0:
        raise SimulationError("cnot_time_s must be positive")
    theta = spec.zz_angle

    def layer(ent: EntanglingLayer):
        return PhaseInjectionLayer(zz_rotations=tuple((g.qubits, theta) for g in ent.gates))

    return _inject(circuit, layer)


def inject_phases(circuit: Circuit, z_angle: float, zz_angle: float) -> Circuit:
    """Append Rz(z_angle) on each gated qubit and ZZ(zz_angle) on each gated pair after each CNOT layer."""

    def layer(ent: EntanglingLayer):
        return PhaseInjectionLayer(
            z_rotations=tuple((q, z_angle) for g in ent.gates for q in g.qubits) if z_angle else (),
            zz_rotations=tuple((g.qubits, zz_angle) for g in ent.gates) if zz_angle else (),
        )

    if not z_angle and not zz_angle:
        return circuit
    return _inject(circuit, layer)


def append_final_layer(circuit: Circuit, unitaries: Sequence[np.ndarray]) -> Circuit:
    """Add a trailing single-qubit layer (outside the cycle count)."""
    layer = SingleQubitLayer(tuple(np.asarray(u, dtype=complex) for u in unitaries))
    return Circuit(circuit.n_qubits, circuit.seed, circuit.cycles, circuit.layers + (layer,))


# -- serialization ---------------------------------------------------------


def _cx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _layer_to_obj(layer: Layer) -> dict:
    if isinstance(layer, SingleQubitLayer):
        return {
            "type": "single",
            "unitaries": [[[_cx(z) for z in row] for row in u] for u in layer.unitaries],
        }
    if isinstance(layer, EntanglingLayer):
        gates = []
        for g in layer.gates:
            obj = {"control": g.control, "target": g.target, "kind": g.kind}
            if g.matrix is not None:
                obj["matrix"] = [[_cx(z) for z in row] for row in g.matrix]
            gates.append(obj)
        return {"type": "entangling", "gates": gates}
    return {
        "type": "injection",
        "noise": True,
        "z": [[q, float(a)] for q, a in layer.z_rotations],
        "zz": [[list(p), float(a)] for p, a in layer.zz_rotations],
    }


def circuit_to_obj(circuit: Circuit) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_qubits": circuit.n_qubits,
        "seed": circuit.seed,
        "cycles": circuit.cycles,
        "layers": [_layer_to_obj(l) for l in circuit.layers],
    }


def serialize_circuit(circuit: Circuit) -> bytes:
    """Canonical JSON bytes; floats are written with round-trip precision."""
    return json.dumps(circuit_to_obj(circuit), sort_keys=True, separators=(",", ":")).encode()


def _matrix(obj) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in obj], dtype=complex)


def _layer_from_obj(obj: dict) -> Layer:
    kind = obj["type"]
    if kind == "single":
        return SingleQubitLayer(tuple(_matrix(u) for u in obj["unitaries"]))
    if kind == "entangling":
        gates = []
        for g in obj["gates"]:
            m = _matrix(g["matrix"]) if g.get("kind", "CNOT") != "CNOT" else None
            gates.append(TwoQubitGate(int(g["control"]), int(g["target"]), m))
        return EntanglingLayer(tuple(gates))
    if kind == "injection":
        return PhaseInjectionLayer(
            z_rotations=tuple((int(q), float(a)) for q, a in obj.get("z", [])),
            zz_rotations=tuple(((int(p[0]), int(p[1])), float(a)) for p, a in obj.get("zz", [])),
        )
    raise CircuitFormatError(f"unknown layer type {kind!r}")


def circuit_from_obj(obj: dict) -> Circuit:
    if obj.get("format") != FORMAT_NAME:
        raise CircuitFormatError(f"not a circuit file (format={obj.get('format')!r})")
    if obj.get("version") != FORMAT_VERSION:
        raise CircuitVersionError(
            f"unsupported circuit format version {obj.get('version')!r}; expected {FORMAT_VERSION}"
        )
    try:
        layers = tuple(_layer_from_obj(l) for l in obj["layers"])
        return Circuit(int(obj["n_qubits"]), int(obj["seed"]), int(obj["cycles"]), layers)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CircuitFormatError):
            raise
        raise CircuitFormatError(f"malformed circuit: {exc}") from exc


def parse_circuit(data: bytes | str) -> Circuit:
    if isinstance(data, bytes):
        data = data.decode()
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CircuitFormatError(f"parse error at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise CircuitFormatError("parse error at offset 0: top level must be an object")
    return circuit_from_obj(obj)
