"""Exact pure-state and density-matrix simulation of small qubit registers.

Bit order: qubit ``k`` is bit ``k`` of the basis index, i.e. the ``k``-th
character counted from the RIGHT of a bitstring.  ``|01>`` on two qubits
has qubit 0 set and is basis index 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

if TYPE_CHECKING:
    from .circuitgen import Circuit

PURE_QUBIT_CAP = 14
MIXED_QUBIT_CAP = 8

_UNITARY_TOL = 1e-10
_KRAUS_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = (I2, X, Y, Z)

# Local index = control bit + 2 * target bit (first listed qubit is the low bit).
CNOT = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
    ],
    dtype=complex,
)


class SimulationError(ValueError):
    """Invalid simulation input (bad index, non-unitary gate, cap exceeded)."""


def _check_unitary(matrix: np.ndarray, tol: float = _UNITARY_TOL) -> None:
    d = matrix.shape[0]
    if matrix.shape != (d, d):
        raise SimulationError(f"gate matrix must be square, got {matrix.shape}")
    err = np.max(np.abs(matrix.conj().T @ matrix - np.eye(d)))
    if err > tol:
        raise SimulationError(f"gate matrix is not unitary (|U^dag U - I| = {err:.3e})")


@dataclass(frozen=True)
class SingleQubitGate:
    target: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise SimulationError("single-qubit gate must be 2x2")
        _check_unitary(m)
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,)


@dataclass(frozen=True)
class TwoQubitGate:
    """Two-qubit gate.

    ``matrix`` is expressed in the (control, target) local basis with the
    control as the low bit: local index = control + 2 * target.  ``None``
    means CNOT.
    """

    control: int
    target: int
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.control == self.target:
            raise SimulationError("control and target must differ")
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (4, 4):
                raise SimulationError("two-qubit gate must be 4x4")
            _check_unitary(m)
            object.__setattr__(self, "matrix", m)

    @property
    def kind(self) -> str:
        return "CNOT" if self.matrix is None else "GeneralUnitary"

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.control, self.target)

    def unitary(self) -> np.ndarray:
        return CNOT if self.matrix is None else self.matrix


Gate = Union[SingleQubitGate, TwoQubitGate]


@dataclass(frozen=True)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (2**self.n_qubits,):
            raise SimulationError(f"expected {2**self.n_qubits} amplitudes, got {a.shape}")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > 1e-10:
            raise SimulationError(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def zero(cls, n_qubits: int) -> "PureState":
        a = np.zeros(2**n_qubits, dtype=complex)
        a[0] = 1.0
        return cls(n_qubits, a)

    def probabilities(self) -> "ProbabilityVector":
        return ProbabilityVector(self.n_qubits, np.abs(self.amplitudes) ** 2)

    def to_mixed(self) -> "MixedState":
        return MixedState(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class MixedState:
    n_qubits: int
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2**self.n_qubits
        if m.shape != (d, d):
            raise SimulationError(f"expected {d}x{d} density matrix, got {m.shape}")
        if self.validate:
            if np.max(np.abs(m - m.conj().T)) > 1e-10:
                raise SimulationError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > 1e-10:
                raise SimulationError(f"density matrix trace is {tr!r}, expected 1")
            if np.linalg.eigvalsh(m).min() < -1e-9:
                raise SimulationError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def zero(cls, n_qubits: int) -> "MixedState":
        return PureState.zero(n_qubits).to_mixed()

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "MixedState":
        d = 2**n_qubits
        return cls(n_qubits, np.eye(d, dtype=complex) / d)

    def probabilities(self) -> "ProbabilityVector":
        p = np.clip(np.diag(self.matrix).real, 0.0, None)
        return ProbabilityVector(self.n_qubits, p / p.sum())


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]
    acting_qubits: tuple[int, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise SimulationError("channel needs at least one Kraus operator")
        d = 2 ** len(self.acting_qubits)
        for k in ops:
            if k.shape != (d, d):
                raise SimulationError(
                    f"Kraus operator shape {k.shape} does not match {len(self.acting_qubits)} acting qubits"
                )
        completeness = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(completeness - np.eye(d)))
        if err > _KRAUS_TOL:
            raise SimulationError(f"Kraus operators are not complete (error {err:.3e})")
        if len(set(self.acting_qubits)) != len(self.acting_qubits):
            raise SimulationError("acting qubits must be distinct")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "acting_qubits", tuple(int(q) for q in self.acting_qubits))


@dataclass(frozen=True)
class ProbabilityVector:
    n_qubits: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2**self.n_qubits,):
            raise SimulationError(f"expected {2**self.n_qubits} probabilities, got {p.shape}")
        if np.any(p < 0):
            raise SimulationError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise SimulationError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, n_qubits: int, counts: np.ndarray) -> "ProbabilityVector":
        counts = np.asarray(counts)
        return cls(n_qubits, counts / counts.sum())


# -- random unitaries ------------------------------------------------------


def haar_random_su2(rng: np.random.Generator) -> np.ndarray:
    """Draw a 2x2 unitary from the Haar measure on U(2).

    QR of a complex Ginibre matrix, with the phases of ``R``'s diagonal
    folded back into ``Q`` so the result is exactly Haar distributed.
    """
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)


def zz_phase(angle: float) -> np.ndarray:
    """exp(-i angle/2 Z⊗Z)."""
    ph = np.exp(-0.5j * angle)
    return np.diag([ph, ph.conjugate(), ph.conjugate(), ph])


# -- tensor helpers --------------------------------------------------------


def _axis(qubit: int, n: int) -> int:
    return n - 1 - qubit


def _check_qubits(qubits: Sequence[int], n: int) -> None:
    for q in qubits:
        if not 0 <= q < n:
            raise SimulationError(f"qubit index {q} out of range for {n} qubits")


def _apply_to_vector(psi: np.ndarray, op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Multiply ``op`` (local index = sum bit_j 2^j over ``qubits``) into a state tensor."""
    k = len(qubits)
    # Local op as a tensor: out bits (b_{k-1} .. b_0), in bits (same order).
    op_t = op.reshape([2] * (2 * k))
    axes = [_axis(q, n) for q in reversed(qubits)]
    t = psi.reshape([2] * n)
    t = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(-1)


def _apply_to_matrix(rho: np.ndarray, op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Return op ρ op† with op acting on ``qubits``."""
    k = len(qubits)
    d = 2**n
    op_t = op.reshape([2] * (2 * k))
    row_axes = [_axis(q, n) for q in reversed(qubits)]
    col_axes = [n + a for a in row_axes]
    t = rho.reshape([2] * (2 * n))
    t = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), row_axes))
    t = np.moveaxis(t, list(range(k)), row_axes)
    t = np.tensordot(t, op_t.conj(), axes=(col_axes, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), col_axes)
    return t.reshape(d, d)


def _embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``op`` acting on ``qubits``."""
    k = len(qubits)
    d = 2**n
    op_t = op.reshape([2] * (2 * k))
    axes = [_axis(q, n) for q in reversed(qubits)]
    t = np.eye(d, dtype=complex).reshape([2] * n + [d])
    t = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(d, d)


def _layer_kron(unitaries: Sequence[np.ndarray]) -> np.ndarray:
    # qubit 0 is the low bit, so it is the rightmost Kronecker factor
    full = np.ones((1, 1), dtype=complex)
    for u in reversed(unitaries):
        d = full.shape[0]
        full = (full[:, None, :, None] * u[None, :, None, :]).reshape(2 * d, 2 * d)
    return full


def _pair_depolarize_matrix(rho: np.ndarray, lam: float, qubits: Sequence[int], n: int) -> np.ndarray:
    """(1-λ)ρ + λ (I/d on ``qubits``) ⊗ Tr_qubits ρ, without building Kraus operators."""
    if lam == 0.0:
        return rho
    k = len(qubits)
    dk = 2**k
    row_axes = sorted(_axis(q, n) for q in qubits)
    col_axes = [n + a for a in row_axes]
    rest = [a for a in range(2 * n) if a not in row_axes and a not in col_axes]
    order = row_axes + col_axes + rest
    t = np.transpose(rho.reshape([2] * (2 * n)), order).reshape((dk, dk) + (2,) * len(rest))
    reduced = np.trace(t, axis1=0, axis2=1)
    full = np.multiply.outer(np.eye(dk) / dk, reduced).reshape([2] * (2 * n))
    full = np.moveaxis(full, list(range(2 * n)), order)
    return (1.0 - lam) * rho + lam * full.reshape(rho.shape)


# -- operations ------------------------------------------------------------


def apply_unitary(state: PureState | MixedState, gate: Gate) -> PureState | MixedState:
    """Apply a one- or two-qubit gate to a pure or mixed state."""
    n = state.n_qubits
    _check_qubits(gate.qubits, n)
    if isinstance(gate, SingleQubitGate):
        op, qubits = gate.matrix, (gate.target,)
    else:
        op, qubits = gate.unitary(), (gate.control, gate.target)
    if isinstance(state, PureState):
        return PureState(n, _apply_to_vector(state.amplitudes, op, qubits, n))
    return MixedState(n, _apply_to_matrix(state.matrix, op, qubits, n), validate=False)


def apply_channel(state: MixedState, channel: KrausChannel) -> MixedState:
    """ρ → Σ K ρ K† over the channel's acting qubits."""
    n = state.n_qubits
    _check_qubits(channel.acting_qubits, n)
    out = np.zeros_like(state.matrix)
    for k in channel.operators:
        out += _apply_to_matrix(state.matrix, k, channel.acting_qubits, n)
    return MixedState(n, out, validate=False)


def depolarizing_channel(lam: float, n_qubits_acted: int = 2, acting_qubits: Sequence[int] | None = None) -> KrausChannel:
    """Depolarizing channel ρ → (1-λ)ρ + λ I/d as weighted Pauli Kraus operators.

    Args:
        lam: depolarizing parameter in [0, 1].
        n_qubits_acted: 1 or 2.
        acting_qubits: qubit indices; defaults to ``range(n_qubits_acted)``.
    """
    if not 0.0 <= lam <= 1.0:
        raise SimulationError(f"depolarizing parameter must lie in [0, 1], got {lam}")
    if n_qubits_acted not in (1, 2):
        raise SimulationError("depolarizing channel supports 1 or 2 qubits")
    if acting_qubits is None:
        acting_qubits = tuple(range(n_qubits_acted))
    if len(acting_qubits) != n_qubits_acted:
        raise SimulationError("acting_qubits length must equal n_qubits_acted")
    d = 2**n_qubits_acted
    if lam == 0.0:
        return KrausChannel((np.eye(d, dtype=complex),), tuple(acting_qubits))
    if n_qubits_acted == 1:
        paulis = list(PAULIS)
    else:
        # kron(b, a) puts Pauli ``a`` on the low (first listed) qubit.
        paulis = [np.kron(b, a) for b in PAULIS for a in PAULIS]
    w_id = np.sqrt(1.0 - lam + lam / d**2)
    w = np.sqrt(lam / d**2)
    ops = [w_id * paulis[0]] + [w * p for p in paulis[1:]]
    return KrausChannel(tuple(ops), tuple(acting_qubits))


def purity(state: MixedState) -> float:
    """Tr(ρ²)."""
    m = state.matrix
    return float(np.real(np.vdot(m, m)))


def average_gate_infidelity(channel: KrausChannel) -> float:
    """1 - F_avg of a channel relative to the identity."""
    d = 2 ** len(channel.acting_qubits)
    f_pro = sum(abs(np.trace(k)) ** 2 for k in channel.operators) / d**2
    return 1.0 - (d * f_pro + 1) / (d + 1)


# -- noise model and circuit simulation ------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Noise attached to every entangling gate, plus readout confusion.

    Args:
        depolarizing: 2-qubit depolarizing λ applied to each gated pair after
            its entangling gate.
        readout: per-qubit 2x2 column-stochastic confusion matrices
            ``M[measured, prepared]``, indexed by qubit, or ``None``.
        idle_depolarizing: 1-qubit depolarizing λ applied to qubits idle
            during an entangling layer.
        z_angle: Rz angle (radians) applied to both qubits of each gated pair.
        zz_angle: ZZ phase θ of exp(-iθ/2 Z⊗Z) applied to each gated pair.
    """

    depolarizing: float = 0.0
    readout: tuple[np.ndarray, ...] | None = None
    idle_depolarizing: float = 0.0
    z_angle: float = 0.0
    zz_angle: float = 0.0

    def __post_init__(self):
        for name in ("depolarizing", "idle_depolarizing"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationError(f"{name} must lie in [0, 1], got {v}")
        for name in ("z_angle", "zz_angle"):
            if not np.isfinite(getattr(self, name)):
                raise SimulationError(f"{name} must be finite")
        if self.readout is not None:
            mats = tuple(np.asarray(m, dtype=float) for m in self.readout)
            for m in mats:
                if m.shape != (2, 2) or np.any(m < 0) or not np.allclose(m.sum(axis=0), 1.0, atol=1e-12):
                    raise SimulationError("readout matrices must be 2x2 column-stochastic")
            object.__setattr__(self, "readout", mats)

    @classmethod
    def symmetric_readout(cls, n_qubits: int, eps: float, **kwargs) -> "NoiseModel":
        m = np.array([[1 - eps, eps], [eps, 1 - eps]])
        return cls(readout=tuple(m for _ in range(n_qubits)), **kwargs)

    @property
    def has_coherent(self) -> bool:
        return self.z_angle != 0.0 or self.zz_angle != 0.0

    def pair_unitary(self) -> np.ndarray | None:
        """Coherent error unitary on a gated pair, or ``None`` if absent."""
        if not self.has_coherent:
            return None
        rzz = rz(self.z_angle)
        return zz_phase(self.zz_angle) @ np.kron(rzz, rzz)


def apply_readout(probs: np.ndarray, readout: Sequence[np.ndarray], n: int) -> np.ndarray:
    if len(readout) != n:
        raise SimulationError(f"need {n} readout matrices, got {len(readout)}")
    t = probs.reshape([2] * n)
    for q, m in enumerate(readout):
        a = _axis(q, n)
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [a])), 0, a)
    return t.reshape(-1)


def _check_cap(n: int, cap: int, kind: str) -> None:
    if n > cap:
        raise SimulationError(f"{kind} simulation is capped at {cap} qubits, got {n}")


def _final_vector(psi: np.ndarray, final_layer, n: int) -> np.ndarray:
    for q, u in enumerate(final_layer):
        psi = _apply_to_vector(psi, u, (q,), n)
    return psi


def evolve_pure(
    circuit: "Circuit", *, cap: int = PURE_QUBIT_CAP, snapshots: bool = False, final_layer: Sequence[np.ndarray] | None = None
):
    """Statevector evolution from |0…0>.

    With ``snapshots`` returns a list of probability arrays taken after each
    cycle boundary (index d is the state after d cycles, index 0 is |0…0>).
    ``final_layer`` (one 2x2 unitary per qubit) is applied to each snapshot
    before it is measured, without entering the evolution itself.
    """
    from .circuitgen import EntanglingLayer, PhaseInjectionLayer, SingleQubitLayer

    n = circuit.n_qubits
    _check_cap(n, cap, "pure-state")
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    if final_layer is not None and len(final_layer) != n:
        raise SimulationError(f"final layer needs {n} unitaries, got {len(final_layer)}")

    def snap(v):
        if final_layer is not None:
            v = _final_vector(v, final_layer, n)
        return np.abs(v) ** 2

    snaps = [snap(psi)] if snapshots else None
    ends = circuit.cycle_ends()
    for i, layer in enumerate(circuit.layers):
        if isinstance(layer, SingleQubitLayer):
            for q, u in enumerate(layer.unitaries):
                psi = _apply_to_vector(psi, u, (q,), n)
        elif isinstance(layer, EntanglingLayer):
            for g in layer.gates:
                psi = _apply_to_vector(psi, g.unitary(), g.qubits, n)
        elif isinstance(layer, PhaseInjectionLayer):
            for q, ang in layer.z_rotations:
                psi = _apply_to_vector(psi, rz(ang), (q,), n)
            for (a, b), ang in layer.zz_rotations:
                psi = _apply_to_vector(psi, zz_phase(ang), (a, b), n)
        if snapshots and i in ends:
            snaps.append(snap(psi))
    if snapshots:
        return snaps
    return psi if final_layer is None else _final_vector(psi, final_layer, n)


def ideal_probabilities(circuit: "Circuit", *, cap: int = PURE_QUBIT_CAP) -> ProbabilityVector:
    """|<x|U|0>|² for every basis state x."""
    psi = evolve_pure(circuit, cap=cap)
    p = np.abs(psi) ** 2
    return ProbabilityVector(circuit.n_qubits, p / p.sum())


def _noisy_states(circuit: "Circuit", noise: NoiseModel, cap: int):
    """Yield (layer index, ρ) after each layer of a density-matrix evolution.

    Each layer's gates act on disjoint qubits, so a layer is applied as one
    embedded unitary followed by the per-pair channels.
    """
    from .circuitgen import EntanglingLayer, PhaseInjectionLayer, SingleQubitLayer

    n = circuit.n_qubits
    _check_cap(n, cap, "mixed-state")
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    pair_u = noise.pair_unitary()
    ent_cache: dict = {}
    yield -1, rho
    for i, layer in enumerate(circuit.layers):
        if isinstance(layer, SingleQubitLayer):
            u = layer.matrix
            rho = u @ rho @ u.conj().T
        elif isinstance(layer, EntanglingLayer):
            key = tuple((g.qubits, g.kind if g.matrix is None else g.matrix.tobytes()) for g in layer.gates)
            if key not in ent_cache:
                e = np.eye(2**n, dtype=complex)
                for g in layer.gates:
                    op = g.unitary() if pair_u is None else pair_u @ g.unitary()
                    e = _embed(op, g.qubits, n) @ e
                ent_cache[key] = e
            e = ent_cache[key]
            rho = e @ rho @ e.conj().T
            busy = set()
            for g in layer.gates:
                rho = _pair_depolarize_matrix(rho, noise.depolarizing, g.qubits, n)
                busy.update(g.qubits)
            if noise.idle_depolarizing > 0.0:
                for q in range(n):
                    if q not in busy:
                        rho = _pair_depolarize_matrix(rho, noise.idle_depolarizing, (q,), n)
        elif isinstance(layer, PhaseInjectionLayer):
            for q, ang in layer.z_rotations:
                rho = _apply_to_matrix(rho, rz(ang), (q,), n)
            for (a, b), ang in layer.zz_rotations:
                rho = _apply_to_matrix(rho, zz_phase(ang), (a, b), n)
        yield i, rho


def _measure(rho: np.ndarray, noise: NoiseModel, n: int) -> np.ndarray:
    p = np.clip(np.diag(rho).real, 0.0, None)
    if noise.readout is not None:
        p = apply_readout(p, noise.readout, n)
    return p / p.sum()


def noisy_final_state(circuit: "Circuit", noise: NoiseModel, *, cap: int = MIXED_QUBIT_CAP) -> MixedState:
    rho = None
    for _, rho in _noisy_states(circuit, noise, cap):
        pass
    return MixedState(circuit.n_qubits, rho)


def noisy_probabilities(circuit: "Circuit", noise: NoiseModel, *, cap: int = MIXED_QUBIT_CAP) -> ProbabilityVector:
    """Density-matrix simulation under ``noise``, including readout confusion."""
    rho = None
    for _, rho in _noisy_states(circuit, noise, cap):
        pass
    return ProbabilityVector(circuit.n_qubits, _measure(rho, noise, circuit.n_qubits))


def noisy_snapshots(
    circuit: "Circuit",
    noise: NoiseModel,
    *,
    cap: int = MIXED_QUBIT_CAP,
    with_purity: bool = False,
    final_layer: Sequence[np.ndarray] | None = None,
):
    """Measured probabilities after every cycle (index d = after d cycles).

    When ``with_purity`` is set, also returns Tr(ρ²) at the same points.
    ``final_layer`` unitaries are applied noiselessly before each measurement.
    """
    n = circuit.n_qubits
    if final_layer is not None and len(final_layer) != n:
        raise SimulationError(f"final layer needs {n} unitaries, got {len(final_layer)}")
    probs, purities = [], []
    ends = circuit.cycle_ends()
    for i, rho in _noisy_states(circuit, noise, cap):
        if i < 0 or i in ends:
            r = rho
            if final_layer is not None:
                for q, u in enumerate(final_layer):
                    r = _apply_to_matrix(r, u, (q,), n)
            probs.append(_measure(r, noise, n))
            if with_purity:
                purities.append(float(np.real(np.vdot(rho, rho))))
    return (probs, purities) if with_purity else probs


def sample_counts(probs: ProbabilityVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial draw of ``shots`` outcomes; returns counts indexed by basis state."""
    if shots <= 0:
        raise SimulationError("shots must be a positive integer")
    p = probs.probs / probs.probs.sum()
    return rng.multinomial(int(shots), p)


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


def counts_to_dict(counts: np.ndarray, n_qubits: int) -> dict[str, int]:
    return {bitstring(i, n_qubits): int(c) for i, c in enumerate(counts) if c}
