"""Decay fits, error-per-gate conversion and error bars for fidelity curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .bogmetric import Algorithm, BinSpec, Reference, seed_fidelity
from .circuitgen import Topology


class FitError(RuntimeError):
    """A fit failed to converge or its input was degenerate."""


@dataclass(frozen=True)
class CurvePoint:
    depth: int
    fidelity: float
    stderr: float = 0.0


@dataclass(frozen=True)
class FidelityCurve:
    points: tuple[CurvePoint, ...]
    algorithm: Algorithm
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        depths = [p.depth for p in self.points]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise ValueError("curve depths must be strictly increasing")
        if any(p.stderr < 0 for p in self.points):
            raise ValueError("stderr must be nonnegative")

    @property
    def depths(self) -> np.ndarray:
        return np.array([p.depth for p in self.points], dtype=float)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([p.fidelity for p in self.points], dtype=float)

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points], dtype=float)


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    decay: float
    covariance: np.ndarray
    residual_norm: float

    @property
    def decay_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[1, 1], 0.0)))


@dataclass(frozen=True)
class EpgReport:
    epg: float
    prefactor: float
    gates_per_block: int
    cycles_per_block: int
    stderr: float = 0.0
    incoherent_epg: float | None = None


def fit_decay(curve: FidelityCurve, *, max_nfev: int = 2000) -> DecayFit:
    """Weighted least-squares fit of F(d) = A (1 - λ)^d with λ in [0, 1].

    Weights are 1/stderr²; if any point has zero stderr all points get unit
    weight.  The covariance is scaled by the reduced chi-square.
    """
    d, f, s = curve.depths, curve.fidelities, curve.stderrs
    if len(d) < 3:
        raise FitError("need at least 3 points to fit a decay")
    if not np.all(np.isfinite(f)):
        raise FitError("fidelities must be finite")
    if np.all(f == 0):
        raise FitError("all fidelities are zero")
    sigma = s if np.all(s > 0) else np.ones_like(f)

    # log-linear start on the clipped data
    slope, intercept = np.polyfit(d, np.log(np.maximum(f, 1e-6)), 1, w=1 / sigma)
    lam0 = float(np.clip(-np.expm1(slope), 1e-9, 1 - 1e-9))
    a0 = float(np.exp(intercept))

    def resid(x):
        return (x[0] * (1 - x[1]) ** d - f) / sigma

    def jac(x):
        base = (1 - x[1]) ** d
        dl = -x[0] * d * (1 - x[1]) ** np.maximum(d - 1, 0)
        return np.stack([base, dl], axis=1) / sigma[:, None]

    res = least_squares(
        resid, [a0, lam0], jac=jac, bounds=([-np.inf, 0.0], [np.inf, 1.0]),
        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev,
    )
    if res.status <= 0:
        raise FitError(f"decay fit did not converge: {res.message}")
    a, lam = res.x
    j = res.jac
    dof = max(len(d) - 2, 1)
    chi2 = float(res.fun @ res.fun)
    try:
        cov = np.linalg.inv(j.T @ j) * (chi2 / dof)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.inf)
    return DecayFit(float(a), float(lam), cov, float(np.linalg.norm(res.fun)))


def block_counts(topology: Topology) -> tuple[int, int]:
    """(gates_per_block, cycles_per_block) of the chain's repeating CNOT pattern."""
    if not topology.even_pairs:
        return len(topology.odd_pairs), 1
    return len(topology.odd_pairs) + len(topology.even_pairs), 2


def epg_from_lambda(lam: float, gates_per_block: int = 1, cycles_per_block: int = 1, lam_stderr: float = 0.0) -> EpgReport:
    """Average two-qubit error per gate, (3/4)(cycles/gates) λ."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"decay parameter must lie in [0, 1], got {lam}")
    if gates_per_block < 1 or cycles_per_block < 1:
        raise ValueError("gate and cycle counts must be positive")
    pref = 0.75 * cycles_per_block / gates_per_block
    return EpgReport(pref * lam, pref, gates_per_block, cycles_per_block, pref * lam_stderr)


def seed_groups(n_seeds: int, groups: int) -> list[np.ndarray]:
    """Contiguous partition of seed indices into ``groups`` nonempty groups."""
    if groups < 1 or groups > n_seeds:
        raise ValueError(f"cannot split {n_seeds} seeds into {groups} groups")
    return np.array_split(np.arange(n_seeds), groups)


def bootstrap_stderr(
    measured: Sequence,
    groups: int,
    spec: BinSpec,
    algorithm: Algorithm | str,
    ideals: Sequence | None = None,
    shots: float = math.inf,
    reference: Reference | str = Reference.AUTO,
    per_seed: bool = False,
) -> float:
    """Standard deviation of group fidelities over contiguous seed groups."""
    if groups < 2:
        return 0.0
    vals = []
    for idx in seed_groups(len(measured), groups):
        q = [measured[i] for i in idx]
        p = None if ideals is None else [ideals[i] for i in idx]
        vals.append(seed_fidelity(q, spec, algorithm, p, shots, per_seed=per_seed, reference=reference).value)
    return float(np.std(vals, ddof=1))


@dataclass(frozen=True)
class QuadraticFit:
    coefficients: np.ndarray
    stderr: np.ndarray
    residual_norm: float


def quadratic_scaling_fit(points: Sequence[tuple[float, float]], sigma: Sequence[float] | None = None) -> QuadraticFit:
    """Least-squares epg(z) = c0 + c1 z + c2 z²."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise FitError("need at least 4 (z, epg) points")
    z, y = pts[:, 0], pts[:, 1]
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise FitError("sigma must be positive")
    x = np.stack([np.ones_like(z), z, z**2], axis=1)
    xw, yw = x * w[:, None], y * w
    if np.linalg.matrix_rank(xw) < 3:
        raise FitError("design matrix is rank deficient (need 3 distinct z values)")
    coef, *_ = np.linalg.lstsq(xw, yw, rcond=None)
    r = yw - xw @ coef
    dof = len(y) - 3
    s2 = float(r @ r) / dof if dof > 0 else 0.0
    cov = np.linalg.inv(xw.T @ xw) * s2
    return QuadraticFit(coef, np.sqrt(np.diag(cov)), float(np.linalg.norm(r)))


def incoherent_epg_from_purity(
    purity_curve: Sequence[tuple[int, float]],
    n_qubits: int,
    gates_per_block: int = 1,
    cycles_per_block: int = 1,
) -> float:
    """Incoherent error per gate from the decay of Tr(ρ²) - 1/2ⁿ.

    Fits the excess purity to a u^d and returns (3/4)(cycles/gates)(1 - √u).
    """
    pts = np.asarray(purity_curve, dtype=float)
    if pts.shape[0] < 3:
        raise FitError("need at least 3 purity points")
    floor = 2.0**-n_qubits
    excess = pts[:, 1] - floor
    if np.any(excess < -1e-12):
        raise FitError("purity below 1/2^n; the density matrix is not positive")
    curve = FidelityCurve(tuple(CurvePoint(int(d), float(e)) for d, e in zip(pts[:, 0], excess)), Algorithm.BY_EXPERIMENTAL)
    fit = fit_decay(curve)
    u = 1.0 - fit.decay
    return 0.75 * cycles_per_block / gates_per_block * (1.0 - math.sqrt(u))


_FIT_PENALTY = 1e6


@dataclass(frozen=True)
class ZZFit:
    j_hz: float
    objective: float
    evaluations: int


def fit_zz_strength(
    epg_points: Sequence[tuple[float, float]],
    cnot_time_s: float,
    baseline_incoherent_epg: float,
    model: Callable[[float, float, float], float] | None = None,
    *,
    template=None,
    bounds: tuple[float, float] = (0.0, 1e6),
    grid_points: int = 11,
) -> ZZFit:
    """Fit a static ZZ strength J (Hz) so simulated EPG(z) matches the data.

    Args:
        epg_points: (z_fraction, measured ByIdeal EPG) pairs.
        cnot_time_s: CNOT duration used to convert J to a phase.
        baseline_incoherent_epg: per-gate EPG of the depolarizing baseline;
            converted to λ = (4/3)·EPG for the model.
        model: ``model(z_fraction, j_hz, depolarizing_lambda) -> epg``.  When
            omitted it is built from ``template`` (an ExperimentConfig) by
            running the infinite-shot ByIdeal pipeline.
        bounds: search interval for J.
        grid_points: coarse grid size before bounded refinement.
    """
    pts = np.asarray(epg_points, dtype=float)
    lam = baseline_incoherent_epg / 0.75
    if model is None:
        if template is None:
            raise ValueError("either model or template is required")
        from .pipeline import epg_model

        model = epg_model(template, cnot_time_s)
    calls = 0
    cache: dict[float, float] = {}

    def objective(j: float) -> float:
        nonlocal calls
        if j not in cache:
            calls += 1
            try:
                pred = np.array([model(z, j, lam) for z in pts[:, 0]])
                cache[j] = float(np.sum((pred - pts[:, 1]) ** 2))
            except FitError:
                # the simulated curve is not a decay at this J; rule it out
                cache[j] = _FIT_PENALTY
        return cache[j]

    lo, hi = bounds
    grid = np.linspace(lo, hi, grid_points)
    vals = [objective(float(j)) for j in grid]
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-4 * (hi - lo) / grid_points})
    if not res.success:
        raise FitError(f"ZZ fit did not converge: {res.message}")
    best = float(res.x) if res.fun <= vals[k] else float(grid[k])
    if best >= hi - 1e-9 * (hi - lo):
        raise FitError("ZZ fit ran into the upper bound")
    return ZZFit(best, objective(best), calls)
