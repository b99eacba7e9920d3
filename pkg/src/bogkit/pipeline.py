"""End-to-end experiment orchestration, analysis and result files.

A run is split in two stages so that simulated and ingested data go
through identical analysis:

* ``simulate`` produces a :class:`Dataset` of per-(depth, seed) measured
  frequencies (plus ideal probabilities and, for finite shots, counts);
* ``analyze`` bins, scores, bootstraps and fits a dataset.
"""
from __future__ import annotations

import csv
import datetime as _dt
import functools
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    CurvePoint,
    DecayFit,
    EpgReport,
    FidelityCurve,
    FitError,
    block_counts,
    bootstrap_stderr,
    epg_from_lambda,
    fit_decay,
    incoherent_epg_from_purity,
)
from .bogmetric import (
    Algorithm,
    accumulate_seeds,
    bog_fidelity,
    compute_bin_edges,
    reference_bins,
    resolve_reference,
    seed_fidelity,
)
from .circuitgen import chain_topology, generate_bog_circuit, inject_phases
from .config import ExperimentConfig
from .records import CountsRecord, IdealRecord
from .simcore import X, apply_readout, evolve_pure, noisy_snapshots

RESULTS_FORMAT = "bogkit.results"
RESULTS_VERSION = 1
CURVE_HEADER = ("depth", "fidelity", "stderr", "algorithm")


@dataclass
class Dataset:
    """Measured data of one experiment, ordered by depth then seed."""

    n_qubits: int
    shots: float
    depths: tuple[int, ...]
    seeds: tuple[int, ...]
    measured: dict[int, list[np.ndarray]]
    ideals: dict[int, list[np.ndarray]] | None = None
    counts: dict[int, list[np.ndarray]] | None = None
    purity: dict[int, float] | None = None

    def counts_records(self) -> list[CountsRecord]:
        if self.counts is None:
            raise ValueError("dataset has no counts (infinite-shot mode)")
        return [
            CountsRecord.from_vector(self.n_qubits, d, s, c)
            for d in self.depths
            for s, c in zip(self.seeds, self.counts[d])
        ]

    def ideal_records(self) -> list[IdealRecord]:
        if self.ideals is None:
            raise ValueError("dataset has no ideal probabilities")
        return [IdealRecord(self.n_qubits, d, s, p) for d in self.depths for s, p in zip(self.seeds, self.ideals[d])]


@dataclass
class AlgorithmResult:
    algorithm: Algorithm
    reference: str
    bins: dict[int, dict[str, np.ndarray]]
    curve: FidelityCurve
    fit: DecayFit | None
    epg: EpgReport | None


@dataclass
class ResultsBundle:
    config: dict
    results: dict[Algorithm, AlgorithmResult]
    purity_curve: list[tuple[int, float]] | None
    purity_epg: float | None
    gates_per_block: int
    cycles_per_block: int
    provenance: dict = field(default_factory=dict)

    def epg(self, algorithm: Algorithm | str) -> EpgReport | None:
        return self.results[Algorithm(algorithm)].epg

    def curve(self, algorithm: Algorithm | str) -> FidelityCurve:
        return self.results[Algorithm(algorithm)].curve


def circuit_seeds(master_seed: int, count: int) -> tuple[int, ...]:
    """Per-circuit 64-bit seeds derived from the master seed, in ascending order."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(1,))
    return tuple(sorted(int(s) for s in ss.generate_state(count, dtype=np.uint64)))


def _sampling_rng(master_seed: int, seed: int, depth: int) -> np.random.Generator:
    lo, hi = seed & 0xFFFFFFFF, seed >> 32
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(2, hi, lo, depth)))


@functools.lru_cache(maxsize=512)
def _circuit(n: int, cycles: int, seed: int):
    # circuits are immutable; repeated model evaluations reuse them
    c = generate_bog_circuit(n, cycles, seed)
    return c, tuple(evolve_pure(c, snapshots=True))


def _simulate_seed(config: ExperimentConfig, seed: int):
    """Ideal and measured probabilities at every configured depth for one circuit seed."""
    n = config.n_qubits
    depths = config.depths
    circuit, ideal_snaps = _circuit(n, max(depths), seed)
    noise = config.noise_model()
    final = (X,) * n if config.final_flip else None
    stochastic = noise.depolarizing > 0 or noise.idle_depolarizing > 0
    if stochastic:
        meas_snaps, pur = noisy_snapshots(circuit, noise, with_purity=True, final_layer=final)
    else:
        noisy_circuit = inject_phases(circuit, noise.z_angle, noise.zz_angle) if noise.has_coherent else circuit
        raw = evolve_pure(noisy_circuit, snapshots=True, final_layer=final)
        meas_snaps = [apply_readout(p, noise.readout, n) if noise.readout is not None else p for p in raw]
        pur = [1.0] * len(raw)
    ideals = [ideal_snaps[d] / ideal_snaps[d].sum() for d in depths]
    measured = [meas_snaps[d] / meas_snaps[d].sum() for d in depths]
    purities = [pur[d] for d in depths]
    counts = None
    if not config.infinite_shots:
        counts = [
            _sampling_rng(config.master_seed, seed, d).multinomial(int(config.shots), q) for d, q in zip(depths, measured)
        ]
        measured = [c / int(config.shots) for c in counts]
    return ideals, measured, counts, purities


def simulate(config: ExperimentConfig, workers: int = 1) -> Dataset:
    """Simulate every (seed, depth) job of an experiment."""
    seeds = circuit_seeds(config.master_seed, config.seeds)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            jobs = list(pool.map(_simulate_seed, [config] * len(seeds), seeds))
    else:
        jobs = [_simulate_seed(config, s) for s in seeds]
    depths = config.depths
    ideals = {d: [j[0][i] for j in jobs] for i, d in enumerate(depths)}
    measured = {d: [j[1][i] for j in jobs] for i, d in enumerate(depths)}
    counts = None if config.infinite_shots else {d: [j[2][i] for j in jobs] for i, d in enumerate(depths)}
    purity = {d: float(np.mean([j[3][i] for j in jobs])) for i, d in enumerate(depths)}
    return Dataset(config.n_qubits, config.shots, depths, seeds, measured, ideals, counts, purity)


def dataset_from_records(
    records: Sequence[CountsRecord], ideals: dict[tuple[int, int], np.ndarray] | None = None
) -> Dataset:
    """Group validated counts records into a dataset."""
    if not records:
        raise ValueError("no records")
    n = records[0].n_qubits
    shots = {r.shots for r in records}
    if len(shots) != 1:
        raise ValueError(f"records use different shot counts: {sorted(shots)}")
    depths = tuple(sorted({r.depth for r in records}))
    seeds = tuple(sorted({r.seed for r in records}))
    by_key = {(r.depth, r.seed): r for r in records}
    missing = [(d, s) for d in depths for s in seeds if (d, s) not in by_key]
    if missing:
        d, s = missing[0]
        raise ValueError(f"every seed needs every depth; missing depth={d} seed={s}")
    counts = {d: [by_key[(d, s)].vector() for s in seeds] for d in depths}
    shot = shots.pop()
    measured = {d: [c / shot for c in counts[d]] for d in depths}
    ideal = None
    if ideals is not None:
        ideal = {d: [np.asarray(ideals[(s, d)], dtype=float) for s in seeds] for d in depths}
    return Dataset(n, shot, depths, seeds, measured, ideal, counts)


@dataclass(frozen=True)
class AnalysisOptions:
    num_bins: int
    bootstrap_groups: int = 1
    algorithms: tuple[Algorithm, ...] = (Algorithm.BY_IDEAL, Algorithm.BY_EXPERIMENTAL)
    experimental_reference: str = "auto"
    per_seed_fidelity: bool = False

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "AnalysisOptions":
        return cls(
            config.num_bins,
            config.bootstrap_groups,
            config.algorithm_list,
            config.experimental_reference,
            config.per_seed_fidelity,
        )


def analyze(data: Dataset, options: AnalysisOptions, config_echo: dict | None = None) -> ResultsBundle:
    """Bin, score, bootstrap and fit every requested algorithm."""
    spec = compute_bin_edges(data.n_qubits, options.num_bins)
    topo = chain_topology(data.n_qubits)
    gates, cycles = block_counts(topo)
    results = {}
    for alg in options.algorithms:
        if alg is Algorithm.BY_IDEAL and data.ideals is None:
            raise ValueError("ByIdeal analysis requires ideal probabilities")
        use_ideals = data.ideals is not None
        ref = (
            resolve_reference(options.experimental_reference, use_ideals).value
            if alg is Algorithm.BY_EXPERIMENTAL
            else "ideal_probabilities"
        )
        bins, points = {}, []
        for d in data.depths:
            q = data.measured[d]
            p = data.ideals[d] if use_ideals else None
            exp = accumulate_seeds(q, spec, alg, p if alg is Algorithm.BY_IDEAL else None)
            ib, mb = reference_bins(spec, alg, p, data.shots, options.experimental_reference)
            if options.per_seed_fidelity:
                fid = seed_fidelity(q, spec, alg, p, data.shots, per_seed=True, reference=options.experimental_reference).value
            else:
                fid = bog_fidelity(exp, ib, mb).value
            err = bootstrap_stderr(
                q, options.bootstrap_groups, spec, alg, p, data.shots,
                reference=options.experimental_reference, per_seed=options.per_seed_fidelity,
            )
            bins[d] = {"experimental": exp.weights, "reference_ideal": ib.weights, "reference_mixed": mb.weights}
            points.append(CurvePoint(d, fid, err))
        meta = {"n_qubits": data.n_qubits, "seeds": len(data.seeds), "shots": data.shots, "num_bins": options.num_bins}
        curve = FidelityCurve(tuple(points), alg, meta)
        fit = epg = None
        if len(points) >= 3:
            fit = fit_decay(curve)
            epg = epg_from_lambda(fit.decay, gates, cycles, fit.decay_stderr)
        results[alg] = AlgorithmResult(alg, ref, bins, curve, fit, epg)

    purity_curve = purity_epg = None
    if data.purity is not None:
        purity_curve = [(d, data.purity[d]) for d in data.depths]
        if len(purity_curve) >= 3:
            try:
                purity_epg = incoherent_epg_from_purity(purity_curve, data.n_qubits, gates, cycles)
            except FitError:
                purity_epg = None
    if Algorithm.BY_IDEAL in results and Algorithm.BY_EXPERIMENTAL in results:
        r1, r2 = results[Algorithm.BY_IDEAL], results[Algorithm.BY_EXPERIMENTAL]
        if r1.epg is not None and r2.epg is not None:
            r1.epg = EpgReport(r1.epg.epg, r1.epg.prefactor, gates, cycles, r1.epg.stderr, r2.epg.epg)
    return ResultsBundle(config_echo or {}, results, purity_curve, purity_epg, gates, cycles)


def run_experiment(config: ExperimentConfig, workers: int = 1, timestamp: str | None = None) -> ResultsBundle:
    """Simulate and analyse ``config``; deterministic in the master seed."""
    data = simulate(config, workers)
    bundle = analyze(data, AnalysisOptions.from_config(config), config.to_dict())
    bundle.provenance = {
        "tool": "bogkit",
        "version": __version__,
        "master_seed": config.master_seed,
        "created": timestamp if timestamp is not None else _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return bundle


def epg_model(template: ExperimentConfig, cnot_time_s: float):
    """ByIdeal EPG as a function of (z_fraction, J [Hz], depolarizing λ), infinite shots."""

    def model(z: float, j_hz: float, lam: float) -> float:
        cfg = template.replace(
            z_fraction=z, zz_strength_hz=j_hz, depolarizing=lam, cnot_time_s=cnot_time_s,
            shots=math.inf, algorithms="ByIdeal",
        )
        data = simulate(cfg)
        data.purity = None
        bundle = analyze(data, AnalysisOptions.from_config(cfg))
        return bundle.epg(Algorithm.BY_IDEAL).epg

    return model


# -- serialization ---------------------------------------------------------


def _f(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _fit_obj(fit: DecayFit | None):
    if fit is None:
        return None
    return {
        "amplitude": fit.amplitude,
        "decay": fit.decay,
        "covariance": [[_f(v) for v in row] for row in fit.covariance],
        "residual_norm": fit.residual_norm,
    }


def _epg_obj(e: EpgReport | None):
    if e is None:
        return None
    return {
        "epg": e.epg,
        "stderr": e.stderr,
        "incoherent_epg": e.incoherent_epg,
        "prefactor": e.prefactor,
        "gates_per_block": e.gates_per_block,
        "cycles_per_block": e.cycles_per_block,
    }


def bundle_to_obj(bundle: ResultsBundle) -> dict:
    algs = {}
    for alg, r in bundle.results.items():
        algs[alg.value] = {
            "reference": r.reference,
            "curve": [{"depth": p.depth, "fidelity": p.fidelity, "stderr": p.stderr} for p in r.curve.points],
            "bins": {
                str(d): {k: [float(x) for x in v] for k, v in b.items()} for d, b in r.bins.items()
            },
            "fit": _fit_obj(r.fit),
            "epg": _epg_obj(r.epg),
        }
    return {
        "format": RESULTS_FORMAT,
        "version": RESULTS_VERSION,
        "config": bundle.config,
        "gates_per_block": bundle.gates_per_block,
        "cycles_per_block": bundle.cycles_per_block,
        "algorithms": algs,
        "purity_curve": None if bundle.purity_curve is None else [[d, p] for d, p in bundle.purity_curve],
        "purity_incoherent_epg": bundle.purity_epg,
        "provenance": bundle.provenance,
    }


def curve_csv(curve: FidelityCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for p in curve.points:
        w.writerow([p.depth, repr(float(p.fidelity)), repr(float(p.stderr)), curve.algorithm.value])
    return buf.getvalue()


def read_curve_csv(path: str | Path) -> FidelityCurve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CURVE_HEADER)}")
    algs = {r[3] for r in rows[1:]}
    if len(algs) != 1:
        raise ValueError(f"{path}: a curve file must hold exactly one algorithm")
    pts = tuple(CurvePoint(int(r[0]), float(r[1]), float(r[2])) for r in rows[1:])
    return FidelityCurve(pts, Algorithm(algs.pop()))


def _pct(x, err=None) -> str:
    if x is None:
        return "n/a"
    s = f"{100 * x:.3f}"
    if err is not None:
        s += f" ({100 * err:.3f})"
    return s + "%"


def summary_table(bundle: ResultsBundle) -> str:
    """EPG summary laid out like a benchmarking comparison table."""
    n = bundle.config.get("n_qubits", "?")
    cols, vals = [], []
    r1 = bundle.results.get(Algorithm.BY_IDEAL)
    r2 = bundle.results.get(Algorithm.BY_EXPERIMENTAL)
    if r1 is not None:
        cols.append(f"{n}Q BOG")
        vals.append(_pct(r1.epg.epg, r1.epg.stderr) if r1.epg else "n/a")
    if r2 is not None:
        cols.append(f"{n}Q BOG incoherent")
        vals.append(_pct(r2.epg.epg, r2.epg.stderr) if r2.epg else "n/a")
    if bundle.purity_epg is not None:
        cols.append("purity oracle")
        vals.append(_pct(bundle.purity_epg))
    head = "| | " + " | ".join(cols) + " |"
    sep = "|---|" + "---|" * len(cols)
    row = "| Avg. 2Q error rate | " + " | ".join(vals) + " |"
    return "\n".join([head, sep, row]) + "\n"


def emit_results(bundle: ResultsBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write results.json, curve_<algorithm>.csv and summary.md into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {}
    files["results"] = out / "results.json"
    files["results"].write_text(json.dumps(bundle_to_obj(bundle), indent=1, sort_keys=True) + "\n")
    for alg, r in bundle.results.items():
        p = out / f"curve_{alg.value}.csv"
        p.write_text(curve_csv(r.curve))
        files[f"curve_{alg.value}"] = p
    files["summary"] = out / "summary.md"
    files["summary"].write_text(summary_table(bundle))
    return files


def load_results(path: str | Path) -> dict:
    obj = json.loads(Path(path).read_text())
    if obj.get("format") != RESULTS_FORMAT:
        raise ValueError(f"{path}: not a results file")
    if obj.get("version") != RESULTS_VERSION:
        raise ValueError(f"{path}: unsupported results version {obj.get('version')!r}")
    return obj


def bundle_from_obj(obj: dict) -> ResultsBundle:
    """Rebuild the curve/fit/EPG parts of a bundle from a results file."""
    results = {}
    for name, a in obj["algorithms"].items():
        alg = Algorithm(name)
        curve = FidelityCurve(tuple(CurvePoint(p["depth"], p["fidelity"], p["stderr"]) for p in a["curve"]), alg)
        fit = None
        if a["fit"] is not None:
            cov = np.array([[float(v) for v in row] for row in a["fit"]["covariance"]])
            fit = DecayFit(a["fit"]["amplitude"], a["fit"]["decay"], cov, a["fit"]["residual_norm"])
        epg = None if a["epg"] is None else EpgReport(**a["epg"])
        bins = {int(d): {k: np.array(v) for k, v in b.items()} for d, b in a["bins"].items()}
        results[alg] = AlgorithmResult(alg, a["reference"], bins, curve, fit, epg)
    pc = obj.get("purity_curve")
    return ResultsBundle(
        obj["config"],
        results,
        None if pc is None else [(int(d), float(p)) for d, p in pc],
        obj.get("purity_incoherent_epg"),
        obj["gates_per_block"],
        obj["cycles_per_block"],
        obj.get("provenance", {}),
    )
