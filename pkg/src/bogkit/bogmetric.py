"""Binned Output Generation: Porter-Thomas bins, both binning rules, fidelity.

Bins partition [0, 1] so that each carries equal mass of the q-weighted
Porter-Thomas density N² q e^{-Nq}.  Its CDF is
``F(x) = 1 - e^{-Nx}(1 + Nx)``; the top bin also absorbs the mass beyond 1.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf
from scipy.stats import binom

from .simcore import ProbabilityVector


class BinningError(ValueError):
    pass


class StatisticsWarning(UserWarning):
    """Too few seeds/shots for reliable binned statistics."""


class Algorithm(str, enum.Enum):
    BY_IDEAL = "ByIdeal"
    BY_EXPERIMENTAL = "ByExperimental"


class Reference(str, enum.Enum):
    """Ideal reference used for experimental binning.

    ``porter_thomas`` integrates the Porter-Thomas law over each bin and
    needs no ideal probabilities.  ``empirical`` bins the seeds' ideal
    probabilities by their own values, broadened by the same finite-shot
    sampling as the data.  ``auto`` picks ``empirical`` when ideal
    probabilities are available.
    """

    AUTO = "auto"
    PORTER_THOMAS = "porter_thomas"
    EMPIRICAL = "empirical"


class Kind(str, enum.Enum):
    EXPERIMENTAL = "experimental"
    REFERENCE_IDEAL = "reference_ideal"
    REFERENCE_MIXED = "reference_mixed"


def pt_mass_cdf(x, dim: int):
    """Normalized CDF of the density dim² q e^{-dim q} on [0, inf)."""
    y = dim * np.asarray(x, dtype=float)
    return -np.expm1(-y) - y * np.exp(-y)


def _solve_edge(target: float, dim: int) -> float:
    # Newton on y = dim*x with a bisection bracket; G'(y) = y e^{-y}.
    lo, hi = 0.0, float(dim)
    y = math.sqrt(2 * target) if target < 0.1 else 1.0
    for _ in range(200):
        g = -math.expm1(-y) - y * math.exp(-y) - target
        if g > 0:
            hi = y
        else:
            lo = y
        if abs(g) < 1e-15:
            break
        dg = y * math.exp(-y)
        step = y - g / dg if dg > 0 else None
        y = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, hi):
            break
    return y / dim


@dataclass(frozen=True, eq=False)
class BinSpec:
    n_qubits: int
    edges: np.ndarray

    @property
    def num_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def __eq__(self, other):
        if not isinstance(other, BinSpec):
            return NotImplemented
        return self.n_qubits == other.n_qubits and np.array_equal(self.edges, other.edges)


def compute_bin_edges(n_qubits: int, num_bins: int) -> BinSpec:
    """Equal Porter-Thomas-mass bin edges on [0, 1]."""
    if num_bins < 1:
        raise BinningError("need at least one bin")
    if n_qubits < 1:
        raise BinningError("need at least one qubit")
    dim = 2**n_qubits
    top = float(pt_mass_cdf(1.0, dim))
    edges = [0.0]
    for k in range(1, num_bins):
        t = k / num_bins
        if t >= top:
            raise BinningError(
                f"{num_bins} bins cannot be placed below 1 for {n_qubits} qubits "
                f"(Porter-Thomas mass below 1 is {top:.4f})"
            )
        e = _solve_edge(t, dim)
        if e - edges[-1] < 1e-15:
            raise BinningError(f"bin edges collide at k={k}; {num_bins} bins is not resolvable")
        edges.append(e)
    edges.append(1.0)
    return BinSpec(n_qubits, np.array(edges))


def assign_bins(p, spec: BinSpec) -> np.ndarray:
    """Vectorized bin lookup; bins are half-open [e_k, e_{k+1}), p = 1 goes to the top bin."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise BinningError("probabilities must lie in [0, 1]")
    idx = np.searchsorted(spec.edges, p, side="right") - 1
    return np.minimum(idx, spec.num_bins - 1)


def assign_bin(p: float, spec: BinSpec) -> int:
    return int(assign_bins(np.array([p]), spec)[0])


@dataclass(frozen=True, eq=False)
class BinnedDistribution:
    weights: np.ndarray
    kind: Kind
    algorithm: Algorithm

    @property
    def num_bins(self) -> int:
        return len(self.weights)


def _probs(v) -> np.ndarray:
    return v.probs if isinstance(v, ProbabilityVector) else np.asarray(v, dtype=float)


def _check_dim(v: np.ndarray, spec: BinSpec, what: str) -> None:
    if v.shape != (spec.dim,):
        raise BinningError(f"{what} has {v.shape[0]} entries, bin spec expects {spec.dim}")


def bin_by_ideal(ideal, measured, spec: BinSpec, kind: Kind = Kind.EXPERIMENTAL) -> BinnedDistribution:
    """Add each measured q_i to the bin holding its ideal probability p_i."""
    p, q = _probs(ideal), _probs(measured)
    _check_dim(p, spec, "ideal vector")
    _check_dim(q, spec, "measured vector")
    w = np.bincount(assign_bins(p, spec), weights=q, minlength=spec.num_bins)
    return BinnedDistribution(w, kind, Algorithm.BY_IDEAL)


def bin_by_experimental(measured, spec: BinSpec, kind: Kind = Kind.EXPERIMENTAL) -> BinnedDistribution:
    """Add each measured q_i to the bin holding q_i itself."""
    q = _probs(measured)
    _check_dim(q, spec, "measured vector")
    # sorting makes the float summation order, and so the result, label independent
    qs = np.sort(q[q > 0])
    w = np.bincount(assign_bins(qs, spec), weights=qs, minlength=spec.num_bins)
    return BinnedDistribution(w, kind, Algorithm.BY_EXPERIMENTAL)


def reference_ideal_by_ideal(ideal, spec: BinSpec) -> BinnedDistribution:
    return bin_by_ideal(ideal, ideal, spec, kind=Kind.REFERENCE_IDEAL)


def reference_mixed_by_ideal(ideal, spec: BinSpec) -> BinnedDistribution:
    """Binning of the maximally mixed state: each bitstring contributes 1/N to its ideal bin."""
    p = _probs(ideal)
    _check_dim(p, spec, "ideal vector")
    w = np.bincount(assign_bins(p, spec), minlength=spec.num_bins) / spec.dim
    return BinnedDistribution(w.astype(float), Kind.REFERENCE_MIXED, Algorithm.BY_IDEAL)


def reference_ideal_pt(spec: BinSpec) -> BinnedDistribution:
    """Porter-Thomas mass per bin, top bin extended to infinity."""
    cdf = pt_mass_cdf(spec.edges, spec.dim)
    cdf[-1] = 1.0
    w = np.diff(cdf)
    if np.max(np.abs(w - 1.0 / spec.num_bins)) > 1e-9:
        raise BinningError("bin spec is not equal-mass")
    return BinnedDistribution(w, Kind.REFERENCE_IDEAL, Algorithm.BY_EXPERIMENTAL)


def _lowest_counts(edges: np.ndarray, shots: int) -> np.ndarray:
    """Smallest count c with c/shots >= edge, using the same float comparison as ``assign_bins``."""
    c = np.ceil(edges * shots).astype(np.int64)
    for j in range(len(c)):
        while c[j] > 0 and (c[j] - 1) / shots >= edges[j]:
            c[j] -= 1
        while c[j] / shots < edges[j]:
            c[j] += 1
    return c


def reference_ideal_sampled(ideals: Sequence, spec: BinSpec, shots: float = math.inf) -> BinnedDistribution:
    """Expected experimental binning of the ideal distributions under ``shots``-shot sampling.

    Seed-averaged.  Each outcome's frequency is Binomial(shots, p_i)/shots;
    its binned weight E[q 1{q in bin}] = p_i P(C' in [c_lo - 1, c_hi - 1))
    with C' ~ Binomial(shots - 1, p_i).  Infinite shots reduces to binning
    the ideal probabilities by their own values.
    """
    if not ideals:
        raise BinningError("empirical reference requires ideal probabilities")
    total = np.zeros(spec.num_bins)
    if not math.isfinite(shots):
        for p in ideals:
            total += bin_by_experimental(p, spec).weights
    else:
        s = int(shots)
        if s != shots or s < 1:
            raise BinningError("shots must be a positive integer")
        c = _lowest_counts(spec.edges, s)
        c[-1] = s + 1
        for p in ideals:
            p = _probs(p)
            _check_dim(p, spec, "ideal vector")
            cdf = binom.cdf(c[None, :] - 2, s - 1, p[:, None])
            total += (p[:, None] * np.diff(cdf, axis=1)).sum(axis=0)
    return BinnedDistribution(total / len(ideals), Kind.REFERENCE_IDEAL, Algorithm.BY_EXPERIMENTAL)


def _gaussian_first_moment(a, b, mu: float, sigma: float):
    """∫_a^b q exp(-(q-mu)²/2σ²) dq, closed form."""
    ua, ub = (np.asarray(a) - mu) / sigma, (np.asarray(b) - mu) / sigma
    gauss = sigma**2 * (np.exp(-0.5 * ua**2) - np.exp(-0.5 * ub**2))
    err = mu * sigma * math.sqrt(math.pi / 2) * (erf(ub / math.sqrt(2)) - erf(ua / math.sqrt(2)))
    return gauss + err


def reference_mixed_gaussian(spec: BinSpec, shots: float) -> BinnedDistribution:
    """Shot-noise-broadened maximally mixed reference for experimental binning.

    ``shots = inf`` gives the delta limit: all weight in the bin holding 1/N.
    """
    if not shots >= 1:
        raise BinningError("shots must be >= 1")
    mu = 1.0 / spec.dim
    w = np.zeros(spec.num_bins)
    raw = None
    if math.isfinite(shots):
        sigma = 1.0 / math.sqrt(spec.dim * shots)
        raw = _gaussian_first_moment(spec.edges[:-1], spec.edges[1:], mu, sigma)
    if raw is None or raw.sum() <= 1e-300:
        w[assign_bin(mu, spec)] = 1.0
    else:
        w = raw / raw.sum()
    return BinnedDistribution(w, Kind.REFERENCE_MIXED, Algorithm.BY_EXPERIMENTAL)


@dataclass(frozen=True)
class FidelityScore:
    value: float
    seeds_used: int = 1
    shots_per_seed: float = math.inf


def bog_fidelity(
    exp_bins: BinnedDistribution,
    ideal_bins: BinnedDistribution,
    mixed_bins: BinnedDistribution,
    *,
    seeds_used: int = 1,
    shots_per_seed: float = math.inf,
) -> FidelityScore:
    """1 - |ideal - exp|_1 / |ideal - mixed|_1, unclamped."""
    if not exp_bins.num_bins == ideal_bins.num_bins == mixed_bins.num_bins:
        raise BinningError("binned distributions have different bin counts")
    if not exp_bins.algorithm == ideal_bins.algorithm == mixed_bins.algorithm:
        raise BinningError("binned distributions come from different algorithms")
    denom = np.abs(ideal_bins.weights - mixed_bins.weights).sum()
    if denom <= 1e-12:
        raise BinningError("ideal and mixed binnings coincide; fidelity is undefined for this bin spec")
    num = np.abs(ideal_bins.weights - exp_bins.weights).sum()
    return FidelityScore(float(1.0 - num / denom), seeds_used, shots_per_seed)


def _bin_one(measured, ideal, spec: BinSpec, algorithm: Algorithm) -> np.ndarray:
    if algorithm is Algorithm.BY_IDEAL:
        if ideal is None:
            raise BinningError("ByIdeal binning requires ideal probabilities")
        return bin_by_ideal(ideal, measured, spec).weights
    return bin_by_experimental(measured, spec).weights


def accumulate_seeds(
    measured: Sequence,
    spec: BinSpec,
    algorithm: Algorithm | str,
    ideals: Sequence | None = None,
) -> BinnedDistribution:
    """Bin every seed, sum the weights, divide by the seed count."""
    algorithm = Algorithm(algorithm)
    if not measured:
        raise BinningError("need at least one seed")
    if ideals is not None and len(ideals) != len(measured):
        raise BinningError("one ideal vector is needed per seed")
    total = np.zeros(spec.num_bins)
    for i, q in enumerate(measured):
        total += _bin_one(q, None if ideals is None else ideals[i], spec, algorithm)
    return BinnedDistribution(total / len(measured), Kind.EXPERIMENTAL, algorithm)


def resolve_reference(reference: Reference | str, have_ideals: bool) -> Reference:
    reference = Reference(reference)
    if reference is Reference.AUTO:
        return Reference.EMPIRICAL if have_ideals else Reference.PORTER_THOMAS
    if reference is Reference.EMPIRICAL and not have_ideals:
        raise BinningError("empirical reference requires ideal probabilities")
    return reference


def reference_bins(
    spec: BinSpec,
    algorithm: Algorithm | str,
    ideals: Sequence | None = None,
    shots: float = math.inf,
    reference: Reference | str = Reference.AUTO,
) -> tuple[BinnedDistribution, BinnedDistribution]:
    """(ideal, mixed) reference binnings, seed-averaged where they depend on the circuit."""
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.BY_IDEAL:
        if not ideals:
            raise BinningError("ByIdeal references require ideal probabilities")
        ib = np.mean([reference_ideal_by_ideal(p, spec).weights for p in ideals], axis=0)
        mb = np.mean([reference_mixed_by_ideal(p, spec).weights for p in ideals], axis=0)
        return (
            BinnedDistribution(ib, Kind.REFERENCE_IDEAL, algorithm),
            BinnedDistribution(mb, Kind.REFERENCE_MIXED, algorithm),
        )
    mixed = reference_mixed_gaussian(spec, shots)
    if resolve_reference(reference, bool(ideals)) is Reference.EMPIRICAL:
        return reference_ideal_sampled(ideals, spec, shots), mixed
    return reference_ideal_pt(spec), mixed


def seed_fidelity(
    measured: Sequence,
    spec: BinSpec,
    algorithm: Algorithm | str,
    ideals: Sequence | None = None,
    shots: float = math.inf,
    per_seed: bool = False,
    reference: Reference | str = Reference.AUTO,
) -> FidelityScore:
    """Fidelity of a group of seeds.

    By default the seeds' binnings are pooled before scoring.  With
    ``per_seed`` each seed is scored on its own and the scores averaged.
    """
    algorithm = Algorithm(algorithm)
    if per_seed:
        vals = []
        for i, q in enumerate(measured):
            one_ideal = None if ideals is None else [ideals[i]]
            vals.append(seed_fidelity([q], spec, algorithm, one_ideal, shots, reference=reference).value)
        return FidelityScore(float(np.mean(vals)), len(measured), shots)
    exp = accumulate_seeds(measured, spec, algorithm, ideals if algorithm is Algorithm.BY_IDEAL else None)
    ib, mb = reference_bins(spec, algorithm, ideals, shots, reference)
    return bog_fidelity(exp, ib, mb, seeds_used=len(measured), shots_per_seed=shots)


def statistics_warnings(n_qubits: int, seeds: int, num_bins: int, shots: float, algorithms: Sequence) -> list[str]:
    """Rule-of-thumb checks on seed and shot counts."""
    out = []
    dim = 2**n_qubits
    algs = {Algorithm(a) for a in algorithms}
    if Algorithm.BY_IDEAL in algs and seeds * dim < 100 * num_bins:
        out.append(f"seeds * 2^n = {seeds * dim} is not much larger than the bin count {num_bins}")
    if Algorithm.BY_EXPERIMENTAL in algs and shots < 10 * dim:
        out.append(f"shots = {shots} is not much larger than the number of basis states {dim}")
    return out


def warn_statistics(*args, **kwargs) -> list[str]:
    msgs = statistics_warnings(*args, **kwargs)
    for m in msgs:
        warnings.warn(m, StatisticsWarning, stacklevel=2)
    return msgs
