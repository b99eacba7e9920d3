import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bogkit.circuitgen import (
    Circuit,
    CircuitFormatError,
    CircuitVersionError,
    EntanglingLayer,
    InjectionSpec,
    PhaseInjectionLayer,
    SingleQubitLayer,
    Topology,
    append_final_layer,
    chain_topology,
    circuit_to_obj,
    generate_bog_circuit,
    inject_phases,
    inject_z_noise,
    inject_zz,
    parse_circuit,
    serialize_circuit,
)
from bogkit.simcore import SimulationError, X, ideal_probabilities, rz, zz_phase


def test_chain_topologies():
    t2 = chain_topology(2)
    assert t2.odd_pairs == ((0, 1),) and t2.even_pairs == ()
    t6 = chain_topology(6)
    assert t6.odd_pairs == ((0, 1), (2, 3), (4, 5))
    assert t6.even_pairs == ((1, 2), (3, 4))
    t3 = chain_topology(3)
    assert t3.odd_pairs == ((0, 1),) and t3.even_pairs == ((1, 2),)
    with pytest.raises(SimulationError):
        chain_topology(1)


def test_six_qubit_even_cycle_idles_endpoints():
    busy = {q for pair in chain_topology(6).pairs_for_cycle(2) for q in pair}
    assert busy == {1, 2, 3, 4}


def test_topology_rejects_overlapping_pairs():
    with pytest.raises(SimulationError):
        Topology(3, ((0, 1), (1, 2)), ())
    with pytest.raises(SimulationError):
        Topology(2, ((0, 2),), ())


def test_two_qubit_every_cycle_has_cnot():
    c = generate_bog_circuit(2, 270, 5)
    singles = [l for l in c.layers if isinstance(l, SingleQubitLayer)]
    assert len(singles) == 270
    assert c.gate_count() == 270


def test_six_qubit_parity_alternates():
    c = generate_bog_circuit(6, 4, 1)
    ents = [l for l in c.layers if isinstance(l, EntanglingLayer)]
    assert [len(e.gates) for e in ents] == [3, 2, 3, 2]
    assert [g.qubits for g in ents[1].gates] == [(1, 2), (3, 4)]
    assert c.gate_count() == 10


def test_empty_circuit():
    c = generate_bog_circuit(3, 0, 4)
    assert c.layers == ()
    np.testing.assert_allclose(ideal_probabilities(c).probs, np.eye(8)[0])


def test_determinism_and_distinct_seeds():
    a = serialize_circuit(generate_bog_circuit(4, 5, 99))
    b = serialize_circuit(generate_bog_circuit(4, 5, 99))
    assert a == b
    assert a != serialize_circuit(generate_bog_circuit(4, 5, 100))


def test_fresh_unitaries_every_cycle_and_qubit():
    c = generate_bog_circuit(3, 5, 2)
    mats = [u for l in c.layers if isinstance(l, SingleQubitLayer) for u in l.unitaries]
    for i in range(len(mats)):
        for j in range(i):
            assert not np.allclose(mats[i], mats[j])


def test_depth_prefix_property():
    deep = generate_bog_circuit(3, 10, 31)
    shallow = generate_bog_circuit(3, 4, 31)
    assert deep.prefix(4) == shallow


def test_z_injection_angles():
    c = inject_z_noise(generate_bog_circuit(2, 3, 0), 0.01)
    inj = [l for l in c.layers if isinstance(l, PhaseInjectionLayer)]
    assert len(inj) == 3
    assert all(l.noise for l in inj)
    assert inj[0].z_rotations == ((0, pytest.approx(0.0628319, abs=1e-7)), (1, pytest.approx(0.0628319, abs=1e-7)))
    c5 = inject_z_noise(generate_bog_circuit(2, 1, 0), 0.05)
    assert c5.layers[-1].z_rotations[0][1] == pytest.approx(0.3141593, abs=1e-7)
    assert c.cycles == 3 and c.gate_count() == 3


def test_zero_injection_is_identity():
    base = generate_bog_circuit(3, 6, 8)
    np.testing.assert_allclose(
        ideal_probabilities(inject_z_noise(base, 0.0)).probs, ideal_probabilities(base).probs, atol=1e-15
    )
    assert inject_zz(base, InjectionSpec(zz_strength_hz=0.0)).layers[-1].zz_rotations[0][1] == 0.0
    assert inject_phases(base, 0.0, 0.0) is base


def test_zz_phase_values():
    assert InjectionSpec(zz_strength_hz=56.7e3).zz_angle == pytest.approx(0.158078, abs=1e-5)
    assert InjectionSpec(zz_strength_hz=24.4e3).zz_angle == pytest.approx(0.068030, abs=1e-5)
    c = inject_zz(generate_bog_circuit(6, 2, 0), InjectionSpec(zz_strength_hz=56.7e3))
    inj = [l for l in c.layers if isinstance(l, PhaseInjectionLayer)]
    assert [p for p, _ in inj[1].zz_rotations] == [(1, 2), (3, 4)]
    with pytest.raises(SimulationError):
        inject_zz(c, InjectionSpec(zz_strength_hz=1.0, cnot_time_s=0.0))


def test_zz_phase_matrix_form():
    theta = 0.3
    u = zz_phase(theta)
    # exp(-i θ/2 Z⊗Z) equals diag(1, e^{iθ}, e^{iθ}, 1) up to global phase
    ref = np.diag([1, np.exp(1j * theta), np.exp(1j * theta), 1])
    phase = u[0, 0] / ref[0, 0]
    np.testing.assert_allclose(u, phase * ref, atol=1e-14)


def test_cycle_ends_and_prefix_with_injection():
    c = inject_z_noise(generate_bog_circuit(3, 4, 3), 0.02)
    assert len(c.cycle_ends()) == 4
    p = c.prefix(2)
    assert p.cycles == 2 and isinstance(p.layers[-1], PhaseInjectionLayer)
    with pytest.raises(ValueError):
        c.prefix(5)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_circuit_unitary_is_unitary(n):
    if n == 1:
        c = Circuit(1, 0, 0, (SingleQubitLayer((rz(0.3),)),))
    else:
        c = inject_zz(inject_z_noise(generate_bog_circuit(n, 5, n), 0.03), InjectionSpec(zz_strength_hz=5e4))
    u = c.unitary()
    assert np.linalg.norm(u.conj().T @ u - np.eye(2**n)) < 1e-9


def test_unitary_agrees_with_simulation():
    c = generate_bog_circuit(3, 4, 17)
    np.testing.assert_allclose(np.abs(c.unitary()[:, 0]) ** 2, ideal_probabilities(c).probs, atol=1e-13)


def test_round_trip_random_circuits():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        c = generate_bog_circuit(n, int(rng.integers(0, 6)), int(rng.integers(0, 2**63)))
        if rng.random() < 0.5:
            c = inject_z_noise(c, float(rng.random() * 0.05))
        if rng.random() < 0.5:
            c = inject_zz(c, InjectionSpec(zz_strength_hz=float(rng.random() * 1e5)))
        back = parse_circuit(serialize_circuit(c))
        assert back == c
        assert serialize_circuit(back) == serialize_circuit(c)


def test_round_trip_preserves_matrices_exactly():
    c = generate_bog_circuit(2, 3, 2**64 - 1)
    back = parse_circuit(serialize_circuit(c))
    for a, b in zip(c.layers, back.layers):
        if isinstance(a, SingleQubitLayer):
            for u, v in zip(a.unitaries, b.unitaries):
                np.testing.assert_array_equal(u, v)


def test_serialized_form_fields():
    obj = json.loads(serialize_circuit(generate_bog_circuit(2, 1, 3)))
    assert {"version", "n_qubits", "seed", "cycles", "layers"} <= set(obj)
    u = obj["layers"][0]["unitaries"][0]
    assert len(u) == 2 and len(u[0]) == 2 and len(u[0][0]) == 2  # [re, im]


def test_truncated_stream_names_offset():
    data = serialize_circuit(generate_bog_circuit(2, 2, 1))
    with pytest.raises(CircuitFormatError, match="offset"):
        parse_circuit(data[: len(data) // 2])


def test_unknown_version():
    obj = circuit_to_obj(generate_bog_circuit(2, 1, 1))
    obj["version"] = 99
    with pytest.raises(CircuitVersionError):
        parse_circuit(json.dumps(obj))


def test_malformed_layers_rejected():
    obj = circuit_to_obj(generate_bog_circuit(2, 1, 1))
    obj["layers"][0]["unitaries"][0] = [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]
    with pytest.raises(CircuitFormatError):
        parse_circuit(json.dumps(obj))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.floats(0, 0.05), st.integers(2, 4))
def test_injection_commutes_with_serialization(seed, z, n):
    c = generate_bog_circuit(n, 3, seed)
    a = inject_z_noise(c, z)
    b = inject_z_noise(parse_circuit(serialize_circuit(c)), z)
    assert a == b


def test_final_layer_outside_cycle_count():
    c = append_final_layer(generate_bog_circuit(2, 2, 4), (X, X))
    assert c.cycles == 2 and c.gate_count() == 2
    base = ideal_probabilities(generate_bog_circuit(2, 2, 4)).probs
    np.testing.assert_allclose(ideal_probabilities(c).probs, base[::-1], atol=1e-14)
