"""Command-line interface.

Subcommands::

    generate   write circuit files
    simulate   simulate counts (and ideal probabilities) to files
    bin        bin counts files and print the per-depth fidelities
    fit        fit a curve CSV and print λ and EPG
    run        end-to-end experiment into an output directory
    ingest     analyse externally produced counts files
    report     print the summary table of a results file

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import FitError, block_counts, epg_from_lambda, fit_decay
from .bogmetric import Algorithm, BinningError, statistics_warnings
from .circuitgen import (
    CircuitFormatError,
    InjectionSpec,
    chain_topology,
    generate_bog_circuit,
    inject_z_noise,
    inject_zz,
    serialize_circuit,
)
from .config import ConfigError, ExperimentConfig
from .pipeline import (
    AnalysisOptions,
    analyze,
    bundle_from_obj,
    circuit_seeds,
    dataset_from_records,
    emit_results,
    load_results,
    read_curve_csv,
    run_experiment,
    simulate,
    summary_table,
)
from .records import RecordError, ideals_for, ingest_counts, load_circuits, load_ideals, write_records
from .simcore import SimulationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class StrictError(ValueError):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _depths(text: str) -> tuple[int, ...]:
    """Comma list or ``start:stop:step`` range (stop inclusive)."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return tuple(range(start, stop + 1, step))
    return tuple(int(x) for x in text.split(",") if x.strip())


def _readout(text: str):
    vals = _float_list(text)
    return vals[0] if len(vals) == 1 else vals


def _shots(text: str):
    return "inf" if text.lower() in ("inf", "infinite") else int(text)


_CONFIG_FLAGS = {
    "n_qubits": int,
    "depths": _depths,
    "seeds": int,
    "shots": _shots,
    "num_bins": int,
    "master_seed": int,
    "depolarizing": float,
    "readout_error": _readout,
    "idle_depolarizing": float,
    "z_fraction": float,
    "zz_strength_hz": float,
    "cnot_time_s": float,
    "bootstrap_groups": int,
    "algorithms": str,
    "experimental_reference": str,
}
_BOOL_FLAGS = ("per_seed_fidelity", "final_flip")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its fields")
    for name, conv in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=conv, default=None)
    for name in _BOOL_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, action="store_true", default=None)
    p.add_argument("--strict", action="store_true", help="treat statistics warnings as errors")


def _config(args) -> ExperimentConfig:
    base = {}
    if args.config is not None:
        base = ExperimentConfig.load(args.config).to_dict()
    for name in list(_CONFIG_FLAGS) + list(_BOOL_FLAGS):
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    cfg = ExperimentConfig.from_dict(base)
    _check_warnings(cfg.warnings(), args.strict)
    return cfg


def _check_warnings(msgs, strict: bool) -> None:
    for m in msgs:
        if strict:
            raise StrictError(f"statistics guard: {m}")
        print(f"warning: {m}", file=sys.stderr)


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = args.seed or list(circuit_seeds(args.master_seed, args.seeds))
    spec = InjectionSpec(args.z_fraction, args.zz_strength_hz, args.cnot_time_s)
    for s in seeds:
        c = generate_bog_circuit(args.n_qubits, args.cycles, s)
        if args.z_fraction:
            c = inject_z_noise(c, args.z_fraction)
        if args.zz_strength_hz:
            c = inject_zz(c, spec)
        path = out / f"circuit_{s}.json"
        path.write_bytes(serialize_circuit(c))
        print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.infinite_shots:
        raise ConfigError("simulate writes counts and needs a finite shot count")
    data = simulate(cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_records(data.counts_records(), out / "counts.json")
    write_records(data.ideal_records(), out / "ideals.json")
    print(out / "counts.json")
    print(out / "ideals.json")
    return EXIT_OK


def _load_dataset(args):
    records = ingest_counts(args.counts)
    want_ideal = args.algorithms in ("ByIdeal", "both")
    ideals = None
    if args.ideals or args.circuits:
        ideals = ideals_for(records, load_ideals(args.ideals or []), load_circuits(args.circuits or []))
    elif want_ideal:
        raise RecordError("ByIdeal analysis needs --ideals or --circuits")
    return dataset_from_records(records, ideals)


def _options(args, data) -> AnalysisOptions:
    algs = (Algorithm.BY_IDEAL, Algorithm.BY_EXPERIMENTAL) if args.algorithms == "both" else (Algorithm(args.algorithms),)
    _check_warnings(statistics_warnings(data.n_qubits, len(data.seeds), args.num_bins, data.shots, algs), args.strict)
    if not 1 <= args.bootstrap_groups <= len(data.seeds):
        raise ConfigError(f"bootstrap_groups must lie in [1, {len(data.seeds)}]")
    return AnalysisOptions(args.num_bins, args.bootstrap_groups, algs, args.experimental_reference, args.per_seed_fidelity)


def cmd_bin(args) -> int:
    data = _load_dataset(args)
    opts = _options(args, data)
    bundle = analyze(data, dataclasses.replace(opts, bootstrap_groups=1))
    for alg, r in bundle.results.items():
        for p in r.curve.points:
            print(f"{alg.value} depth={p.depth} fidelity={p.fidelity!r} bins={[float(x) for x in r.bins[p.depth]['experimental']]}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    data = _load_dataset(args)
    bundle = analyze(data, _options(args, data), {"n_qubits": data.n_qubits, "source": [str(p) for p in args.counts]})
    bundle.provenance = {"tool": "bogkit", "version": __version__, "created": _now(args)}
    files = emit_results(bundle, args.out)
    print(summary_table(bundle), end="")
    for f in files.values():
        print(f)
    return EXIT_OK


def _now(args) -> str:
    if getattr(args, "timestamp", None):
        return args.timestamp
    import datetime as _dt

    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def cmd_fit(args) -> int:
    curve = read_curve_csv(args.curve)
    fit = fit_decay(curve)
    gates, cycles = block_counts(chain_topology(args.n_qubits))
    epg = epg_from_lambda(fit.decay, gates, cycles, fit.decay_stderr)
    print(json.dumps({
        "algorithm": curve.algorithm.value,
        "amplitude": fit.amplitude,
        "decay": fit.decay,
        "decay_stderr": fit.decay_stderr,
        "epg": epg.epg,
        "epg_stderr": epg.stderr,
    }, indent=1))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    bundle = run_experiment(cfg, workers=args.workers, timestamp=args.timestamp)
    files = emit_results(bundle, args.out)
    print(summary_table(bundle), end="")
    for f in files.values():
        print(f)
    return EXIT_OK


def cmd_report(args) -> int:
    print(summary_table(bundle_from_obj(load_results(args.results))), end="")
    return EXIT_OK


def _analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("counts", nargs="+", type=Path, help="counts files")
    p.add_argument("--ideals", nargs="*", type=Path, help="ideal-probability files")
    p.add_argument("--circuits", nargs="*", type=Path, help="circuit files (ideals are recomputed)")
    p.add_argument("--num-bins", type=int, required=True)
    p.add_argument("--algorithms", choices=("ByIdeal", "ByExperimental", "both"), default="both")
    p.add_argument("--experimental-reference", choices=("auto", "porter_thomas", "empirical"), default="auto")
    p.add_argument("--bootstrap-groups", type=int, default=1)
    p.add_argument("--per-seed-fidelity", action="store_true")
    p.add_argument("--strict", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bogkit", description="Binned output generation benchmarking")
    ap.add_argument("--version", action="version", version=f"bogkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write random circuit files")
    p.add_argument("--n-qubits", type=int, required=True)
    p.add_argument("--cycles", type=int, required=True)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds derived from --master-seed")
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--seed", type=int, action="append", help="explicit circuit seed (repeatable)")
    p.add_argument("--z-fraction", type=float, default=0.0)
    p.add_argument("--zz-strength-hz", type=float, default=0.0)
    p.add_argument("--cnot-time-s", type=float, default=443.73e-9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="simulate counts files")
    _add_config_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bin", help="bin counts and print fidelities")
    _analysis_flags(p)
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("fit", help="fit a curve CSV")
    p.add_argument("curve", type=Path)
    p.add_argument("--n-qubits", type=int, required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("run", help="end-to-end simulated experiment")
    _add_config_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timestamp", help="fixed provenance timestamp (for reproducible files)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="analyse externally produced counts")
    _analysis_flags(p)
    p.add_argument("--timestamp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="print the summary of a results file")
    p.add_argument("results", type=Path)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, RecordError, CircuitFormatError, BinningError, SimulationError, StrictError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
