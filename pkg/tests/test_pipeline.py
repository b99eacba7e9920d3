import json
import math

import numpy as np
import pytest

from bogkit.bogmetric import Algorithm
from bogkit.circuitgen import serialize_circuit
from bogkit.config import ConfigError, ExperimentConfig, six_qubit_replica, two_qubit_replica
from bogkit.pipeline import (
    AnalysisOptions,
    RESULTS_VERSION,
    _circuit,
    analyze,
    bundle_from_obj,
    circuit_seeds,
    dataset_from_records,
    emit_results,
    load_results,
    read_curve_csv,
    run_experiment,
    simulate,
)
from bogkit.records import (
    CountsRecord,
    RecordError,
    ideals_for,
    ingest_counts,
    load_circuits,
    load_ideals,
    write_record,
    write_records,
)

SMALL = ExperimentConfig(
    n_qubits=3, depths=(1, 3, 6, 10, 15), seeds=12, shots=500, num_bins=6,
    depolarizing=0.02, readout_error=0.01, bootstrap_groups=4, master_seed=5,
)


def test_zero_noise_infinite_shots_fidelity_one():
    cfg = ExperimentConfig(n_qubits=4, depths=(2, 5, 9, 14), seeds=10, shots="inf", num_bins=8)
    bundle = run_experiment(cfg)
    for alg in Algorithm:
        np.testing.assert_allclose(bundle.curve(alg).fidelities, 1.0, atol=1e-6)


def test_circuit_seeds_sorted_and_distinct():
    s = circuit_seeds(0, 50)
    assert list(s) == sorted(s) and len(set(s)) == 50
    assert circuit_seeds(0, 50) == s and circuit_seeds(1, 50) != s


def test_identical_runs_identical_bytes(tmp_path):
    a = emit_results(run_experiment(SMALL, timestamp="t"), tmp_path / "a")
    b = emit_results(run_experiment(SMALL, timestamp="t"), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == [
        "curve_ByExperimental.csv", "curve_ByIdeal.csv", "results.json", "summary.md",
    ]


def test_timestamps_confined_to_provenance(tmp_path):
    a = load_results(emit_results(run_experiment(SMALL, timestamp="t1"), tmp_path / "a")["results"])
    b = load_results(emit_results(run_experiment(SMALL, timestamp="t2"), tmp_path / "b")["results"])
    assert a["provenance"] != b["provenance"]
    a.pop("provenance"), b.pop("provenance")
    assert a == b


def test_worker_pool_matches_serial():
    cfg = SMALL.replace(seeds=4, bootstrap_groups=2)
    serial = run_experiment(cfg, timestamp="t")
    pooled = run_experiment(cfg, workers=2, timestamp="t")
    for alg in Algorithm:
        np.testing.assert_array_equal(serial.curve(alg).fidelities, pooled.curve(alg).fidelities)


def test_csv_round_trip_full_precision(tmp_path):
    bundle = run_experiment(SMALL, timestamp="t")
    files = emit_results(bundle, tmp_path)
    for alg in Algorithm:
        back = read_curve_csv(files[f"curve_{alg.value}"])
        assert back.points == bundle.curve(alg).points
        assert back.algorithm is alg
    header = files["curve_ByIdeal"].read_text().splitlines()[0]
    assert header == "depth,fidelity,stderr,algorithm"


def test_results_file_reloads_identically(tmp_path):
    bundle = run_experiment(SMALL, timestamp="t")
    obj = load_results(emit_results(bundle, tmp_path)["results"])
    assert obj["version"] == RESULTS_VERSION
    back = bundle_from_obj(obj)
    for alg in Algorithm:
        assert back.curve(alg).points == bundle.curve(alg).points
        assert back.epg(alg) == bundle.epg(alg)
        np.testing.assert_array_equal(back.results[alg].fit.covariance, bundle.results[alg].fit.covariance)
        for d in SMALL.depths:
            for k, v in bundle.results[alg].bins[d].items():
                np.testing.assert_array_equal(back.results[alg].bins[d][k], v)
    assert ExperimentConfig.from_dict(back.config) == SMALL


def test_summary_has_both_epgs(tmp_path):
    files = emit_results(run_experiment(SMALL, timestamp="t"), tmp_path)
    text = files["summary"].read_text()
    assert "Avg. 2Q error rate" in text
    assert "3Q BOG" in text and "3Q BOG incoherent" in text
    assert text.count("%") >= 2


def test_unwritable_destination(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_results(run_experiment(SMALL.replace(seeds=4, bootstrap_groups=1), timestamp="t"), blocker / "sub")


def _export(tmp_path, cfg):
    data = simulate(cfg)
    write_records(data.counts_records(), tmp_path / "counts.json")
    write_records(data.ideal_records(), tmp_path / "ideals.json")
    return data


def test_export_ingest_reanalyze(tmp_path):
    bundle = run_experiment(SMALL, timestamp="t")
    _export(tmp_path, SMALL)
    records = ingest_counts([tmp_path / "counts.json"])
    ideals = load_ideals([tmp_path / "ideals.json"])
    again = analyze(dataset_from_records(records, ideals), AnalysisOptions.from_config(SMALL))
    for alg in Algorithm:
        np.testing.assert_allclose(again.curve(alg).fidelities, bundle.curve(alg).fidelities, atol=1e-12, rtol=0)


def test_ingest_with_circuit_files(tmp_path):
    data = _export(tmp_path, SMALL)
    paths = []
    for s in data.seeds:
        p = tmp_path / f"c{s}.json"
        p.write_bytes(serialize_circuit(_circuit(3, max(SMALL.depths), s)[0]))
        paths.append(p)
    records = ingest_counts([tmp_path / "counts.json"])
    from_circuits = ideals_for(records, circuits=load_circuits(paths))
    from_file = load_ideals([tmp_path / "ideals.json"])
    for k, v in from_file.items():
        np.testing.assert_allclose(from_circuits[k], v, atol=1e-15)


def test_ingest_without_ideals_runs_experimental_only(tmp_path):
    _export(tmp_path, SMALL)
    records = ingest_counts([tmp_path / "counts.json"])
    data = dataset_from_records(records)
    opts = AnalysisOptions(6, 4, (Algorithm.BY_EXPERIMENTAL,))
    bundle = analyze(data, opts)
    assert bundle.results[Algorithm.BY_EXPERIMENTAL].reference == "porter_thomas"
    with pytest.raises(ValueError):
        analyze(data, AnalysisOptions(6, 4, (Algorithm.BY_IDEAL,)))
    with pytest.raises(RecordError, match="seed="):
        ideals_for(records)


def test_counts_sum_mismatch_names_record(tmp_path):
    rec = CountsRecord(2, 3, 7, 10, {"00": 4, "01": 5})
    write_record(rec, tmp_path / "bad.json")
    with pytest.raises(RecordError, match="bad.json.*sum to 9.*shots = 10"):
        ingest_counts([tmp_path / "bad.json"])


def test_wrong_bitstring_length(tmp_path):
    rec = CountsRecord(3, 3, 7, 10, {"00": 10})
    write_record(rec, tmp_path / "bad.json")
    with pytest.raises(RecordError, match="3-qubit"):
        ingest_counts([tmp_path / "bad.json"])


def test_malformed_counts_files(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "bogkit.counts", "version": 1, "n_qubits": 2')
    with pytest.raises(RecordError, match="offset"):
        ingest_counts([p])
    p.write_text(json.dumps({"format": "bogkit.counts", "version": 7}))
    with pytest.raises(RecordError, match="version"):
        ingest_counts([p])
    p.write_text(json.dumps({"format": "bogkit.counts", "version": 1, "n_qubits": 2, "depth": 1, "seed": 0}))
    with pytest.raises(RecordError, match="shots"):
        ingest_counts([p])
    rec = CountsRecord(2, 1, 0, 3, {"0a": 3})
    with pytest.raises(RecordError):
        rec.validate()


def test_duplicate_records_rejected(tmp_path):
    rec = CountsRecord(2, 3, 7, 10, {"00": 10})
    write_records([rec, rec], tmp_path / "dup.json")
    with pytest.raises(RecordError, match="duplicate"):
        ingest_counts([tmp_path / "dup.json"])


def test_bit_order_in_counts():
    rec = CountsRecord.from_vector(3, 1, 0, np.array([0, 5, 0, 0, 2, 0, 0, 0]))
    assert rec.counts == {"001": 5, "100": 2}
    np.testing.assert_array_equal(rec.vector(), [0, 5, 0, 0, 2, 0, 0, 0])


@pytest.mark.parametrize(
    "change,match",
    [
        ({"depths": ()}, "nonempty"),
        ({"depths": (3, 2)}, "ascending"),
        ({"shots": 0}, "shots"),
        ({"num_bins": 1}, "num_bins"),
        ({"bootstrap_groups": 13}, "bootstrap_groups"),
        ({"n_qubits": 9}, "cap"),
        ({"n_qubits": 1}, "n_qubits"),
        ({"depolarizing": 1.5}, "depolarizing"),
        ({"readout_error": (0.1, 0.2)}, "readout_error"),
        ({"algorithms": "neither"}, "algorithms"),
        ({"experimental_reference": "guess"}, "experimental_reference"),
        ({"cnot_time_s": 0.0}, "cnot_time_s"),
        ({"num_bins": 40, "n_qubits": 2}, "bins"),
        ({"seeds": 0}, "seeds"),
    ],
)
def test_config_validation(change, match):
    with pytest.raises(ConfigError, match=match):
        SMALL.replace(**change)


def test_config_dict_round_trip(tmp_path):
    cfg = SMALL.replace(readout_error=(0.01, 0.02, 0.03), shots="inf")
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(p) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({**cfg.to_dict(), "bins": 3})
    with pytest.raises(ConfigError, match="missing"):
        ExperimentConfig.from_dict({"n_qubits": 2})


def test_replica_configs():
    two = two_qubit_replica()
    assert (two.seeds, two.shots, two.num_bins, max(two.depths), two.bootstrap_groups) == (90, 1000, 10, 270, 10)
    six = six_qubit_replica()
    assert (six.seeds, six.shots, six.num_bins, six.bootstrap_groups) == (40, 8000, 30, 8)
    assert six.warnings() and len(six.warnings()) == 1


def test_six_qubit_replica_runs(tmp_path):
    bundle = run_experiment(six_qubit_replica(depolarizing=0.01), timestamp="t")
    files = emit_results(bundle, tmp_path)
    assert set(files) == {"results", "curve_ByIdeal", "curve_ByExperimental", "summary"}
    for alg in Algorithm:
        assert len(bundle.curve(alg).points) == 20
        assert bundle.epg(alg).epg > 0


def test_final_flip_only_hurts_by_ideal():
    cfg = ExperimentConfig(n_qubits=4, depths=(10, 15, 20), seeds=10, shots="inf", num_bins=8, final_flip=True)
    bundle = run_experiment(cfg)
    np.testing.assert_allclose(bundle.curve(Algorithm.BY_EXPERIMENTAL).fidelities, 1.0, atol=1e-12)
    assert np.all(bundle.curve(Algorithm.BY_IDEAL).fidelities < 0.3)


def test_infinite_shot_mode_has_no_counts():
    data = simulate(SMALL.replace(shots=math.inf))
    assert data.counts is None
    with pytest.raises(ValueError):
        data.counts_records()
