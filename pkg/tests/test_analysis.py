import math

import numpy as np
import pytest

from bogkit.analysis import (
    CurvePoint,
    FidelityCurve,
    FitError,
    block_counts,
    bootstrap_stderr,
    epg_from_lambda,
    fit_decay,
    fit_zz_strength,
    incoherent_epg_from_purity,
    quadratic_scaling_fit,
    seed_groups,
)
from bogkit.bogmetric import Algorithm, compute_bin_edges
from bogkit.circuitgen import chain_topology, generate_bog_circuit
from bogkit.config import ExperimentConfig
from bogkit.pipeline import run_experiment
from bogkit.simcore import NoiseModel, ideal_probabilities, noisy_snapshots


def curve(depths, values, stderr=None, alg=Algorithm.BY_IDEAL):
    s = [0.0] * len(depths) if stderr is None else stderr
    return FidelityCurve(tuple(CurvePoint(int(d), float(v), float(e)) for d, v, e in zip(depths, values, s)), alg)


def test_fit_exact_exponentials():
    d = np.arange(1, 51)
    fit = fit_decay(curve(d, 0.98**d))
    assert fit.amplitude == pytest.approx(1.0, abs=1e-9)
    assert fit.decay == pytest.approx(0.02, abs=1e-9)
    fit = fit_decay(curve(d, 0.9 * 0.95**d))
    assert fit.amplitude == pytest.approx(0.9, abs=1e-9)
    assert fit.decay == pytest.approx(0.05, abs=1e-9)
    assert fit.residual_norm < 1e-9


def test_fit_weighted_exact():
    d = np.array([2, 5, 9, 14, 30])
    fit = fit_decay(curve(d, 0.97 * 0.99**d, stderr=[0.01, 0.02, 0.01, 0.03, 0.05]))
    assert fit.decay == pytest.approx(0.01, abs=1e-9)


def test_fit_covariance_psd():
    rng = np.random.default_rng(0)
    d = np.arange(2, 41, 2)
    f = 0.95**d + rng.normal(0, 0.01, d.size)
    fit = fit_decay(curve(d, f, stderr=[0.01] * d.size))
    assert np.all(np.linalg.eigvalsh(fit.covariance) >= -1e-15)
    assert 0 <= fit.decay <= 1


def test_fit_errors():
    with pytest.raises(FitError):
        fit_decay(curve([1, 2], [0.9, 0.8]))
    with pytest.raises(FitError):
        fit_decay(curve([1, 2, 3], [0.0, 0.0, 0.0]))
    with pytest.raises(FitError):
        fit_decay(curve([1, 2, 3], [0.9, np.nan, 0.7]))
    with pytest.raises(ValueError):
        curve([3, 2, 5], [0.9, 0.8, 0.7])


def test_fit_coverage_on_noisy_data():
    rng = np.random.default_rng(2024)
    d = np.arange(2, 41, 2)
    lam, sigma = 0.03, 0.01
    hits = 0
    for _ in range(200):
        f = (1 - lam) ** d + rng.normal(0, sigma, d.size)
        fit = fit_decay(curve(d, f, stderr=[sigma] * d.size))
        hits += abs(fit.decay - lam) <= 3 * fit.decay_stderr
    assert hits >= 190


def test_epg_examples():
    assert epg_from_lambda(0.0172, 1, 1).epg == pytest.approx(0.0129, abs=1e-12)
    assert epg_from_lambda(0.05, 5, 2).epg == pytest.approx(0.015, abs=1e-15)
    assert epg_from_lambda(0.0).epg == 0.0
    r = epg_from_lambda(0.037, 5, 2, lam_stderr=0.001)
    assert r.epg / 0.037 == 0.75 * 2 / 5 == r.prefactor
    assert r.stderr == pytest.approx(0.0003)
    with pytest.raises(ValueError):
        epg_from_lambda(0.1, 0, 1)
    with pytest.raises(ValueError):
        epg_from_lambda(1.1)


def test_block_counts():
    assert block_counts(chain_topology(2)) == (1, 1)
    assert block_counts(chain_topology(6)) == (5, 2)
    assert block_counts(chain_topology(3)) == (2, 2)


def test_seed_groups():
    assert [len(g) for g in seed_groups(90, 10)] == [9] * 10
    assert [len(g) for g in seed_groups(40, 8)] == [5] * 8
    groups = seed_groups(10, 3)
    np.testing.assert_array_equal(np.concatenate(groups), np.arange(10))
    with pytest.raises(ValueError):
        seed_groups(4, 5)


def test_bootstrap_identical_groups_zero():
    spec = compute_bin_edges(3, 4)
    p = ideal_probabilities(generate_bog_circuit(3, 10, 1)).probs
    q = 0.8 * p + 0.2 / 8
    assert bootstrap_stderr([q] * 8, 4, spec, Algorithm.BY_IDEAL, [p] * 8) == pytest.approx(0.0, abs=1e-14)
    assert bootstrap_stderr([q] * 8, 1, spec, Algorithm.BY_IDEAL, [p] * 8) == 0.0
    with pytest.raises(ValueError):
        bootstrap_stderr([q] * 3, 4, spec, Algorithm.BY_IDEAL, [p] * 3)


def test_bootstrap_positive_on_varied_data():
    spec = compute_bin_edges(3, 4)
    ps = [ideal_probabilities(generate_bog_circuit(3, 10, s)).probs for s in range(8)]
    qs = [(0.5 + 0.05 * i) * p + (0.5 - 0.05 * i) / 8 for i, p in enumerate(ps)]
    assert bootstrap_stderr(qs, 4, spec, "ByIdeal", ps) > 0.01


def test_quadratic_fit():
    z = np.array([0, 0.01, 0.02, 0.03, 0.04, 0.05])
    fit = quadratic_scaling_fit(list(zip(z, 0.01 + 0.2 * z + 3.0 * z**2)))
    np.testing.assert_allclose(fit.coefficients, [0.01, 0.2, 3.0], atol=1e-12)
    fit = quadratic_scaling_fit(list(zip(z, np.full(z.size, 0.01))))
    np.testing.assert_allclose(fit.coefficients[1:], 0, atol=1e-12)
    with pytest.raises(FitError):
        quadratic_scaling_fit([(0, 1), (1, 2), (2, 3)])
    with pytest.raises(FitError):
        quadratic_scaling_fit([(0.1, 1), (0.1, 2), (0.2, 3), (0.2, 4)])


def test_quadratic_fit_stderr_scales_with_noise():
    rng = np.random.default_rng(1)
    z = np.linspace(0, 0.05, 6)
    y = 0.01 + 3.0 * z**2 + rng.normal(0, 1e-4, z.size)
    fit = quadratic_scaling_fit(list(zip(z, y)), sigma=[1e-4] * z.size)
    assert abs(fit.coefficients[2] - 3.0) < 4 * fit.stderr[2]


def _purity_curve(n, noise, depths, seeds=4):
    out = {d: [] for d in depths}
    for s in range(seeds):
        _, pur = noisy_snapshots(generate_bog_circuit(n, max(depths), s), noise, with_purity=True)
        for d in depths:
            out[d].append(pur[d])
    return [(d, float(np.mean(out[d]))) for d in depths]


def test_purity_noiseless_and_unitary_noise_give_zero():
    depths = [1, 5, 10, 20]
    for noise in (NoiseModel(), NoiseModel(z_angle=0.2, zz_angle=0.15)):
        eps = incoherent_epg_from_purity(_purity_curve(3, noise, depths), 3, *block_counts(chain_topology(3)))
        assert eps == pytest.approx(0.0, abs=1e-9)


def test_purity_isolated_pair():
    lam = 0.02
    depths = list(range(1, 80, 6))
    eps = incoherent_epg_from_purity(_purity_curve(2, NoiseModel(depolarizing=lam), depths), 2)
    assert eps == pytest.approx(0.75 * lam, rel=0.10)


def test_purity_below_floor_rejected():
    with pytest.raises(FitError):
        incoherent_epg_from_purity([(1, 0.5), (2, 0.2), (3, 0.1)], 2)


def _toy_model(z, j, lam):
    # coherent error adds in quadrature-like fashion; J enters through its phase
    theta = 2 * math.pi * j * 443.73e-9
    return 0.75 * lam + 0.5 * (2 * math.pi * z + 0.4 * theta) ** 2


def test_zz_fit_with_toy_model():
    zs = np.linspace(0, 0.05, 6)
    data = [(z, _toy_model(z, 5e4, 0.01)) for z in zs]
    fit = fit_zz_strength(data, 443.73e-9, 0.0075, model=_toy_model)
    assert fit.j_hz == pytest.approx(5e4, rel=1e-3)
    data0 = [(z, _toy_model(z, 0.0, 0.01)) for z in zs]
    assert fit_zz_strength(data0, 443.73e-9, 0.0075, model=_toy_model).j_hz < 1e3


def test_zz_fit_hits_bound():
    zs = np.linspace(0, 0.05, 6)
    data = [(z, _toy_model(z, 2e6, 0.01)) for z in zs]
    with pytest.raises(FitError):
        fit_zz_strength(data, 443.73e-9, 0.0075, model=_toy_model)


def test_zz_fit_simulation_in_loop():
    # finite-shot data against the infinite-shot model of the same circuits
    template = ExperimentConfig(n_qubits=2, depths=tuple(range(2, 61, 4)), seeds=20, shots="inf", master_seed=11)
    zs = [0.0, 0.02, 0.04, 0.05]
    lam = 0.01

    def data(j):
        out = []
        for z in zs:
            cfg = template.replace(shots=4000, z_fraction=z, zz_strength_hz=j, depolarizing=lam, algorithms="ByIdeal")
            out.append((z, run_experiment(cfg, timestamp="").epg("ByIdeal").epg))
        return out

    fit = fit_zz_strength(data(5e4), 443.73e-9, 0.75 * lam, template=template, grid_points=9)
    assert fit.j_hz == pytest.approx(5e4, rel=0.10)
    fit0 = fit_zz_strength(data(0.0), 443.73e-9, 0.75 * lam, template=template, grid_points=9)
    assert fit0.j_hz < 1e4
