"""Classical and quantum Fisher information for delay estimation.

The numeric Fisher matrix differentiates outcome probabilities with central
differences.  Steps follow ``h = eps**(1/3) * max(|theta|, scale)`` with a
per-parameter scale (``1/sigma`` for delta, ``0.05`` for alpha and gamma,
``sigma/20`` for sigma).

Outcomes whose probability vanishes at the evaluation point contribute their
limiting value ``2 * d2P`` (curvature of a double zero), which is what the
closed forms give at the dip floor of a perfectly visible interferometer.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .binned import Measurement, OutcomeDistribution
from .errors import (BoundaryError, ConfigError, DegenerateDistributionWarning,
                     FlatFunctionWarning, ParameterError)
from .model import PARAMETER_NAMES, PhysicalParams

EPS = np.finfo(float).eps
STEP_FACTOR = EPS ** (1.0 / 3.0)
# second differences of vanishing probabilities lose digits to cancellation;
# this step balances that rounding against truncation
CURV_FACTOR = EPS ** 0.25
P_FLOOR = 1e-300
RANK_TOL = 1e-10
TIE_TOL = 1e-9
_UNIT_INTERVAL = ("alpha", "gamma")


class ParameterSet(tuple):
    """Ordered, duplicate-free subset of ``("delta", "alpha", "sigma", "gamma")``."""

    def __new__(cls, names=("delta",)):
        if isinstance(names, str):
            names = [n.strip() for n in names.split(",") if n.strip()]
        names = tuple(names)
        if not names:
            raise ConfigError("a parameter set needs at least one parameter")
        unknown = [n for n in names if n not in PARAMETER_NAMES]
        if unknown:
            raise ConfigError(f"unknown parameters {unknown}; expected a subset of {PARAMETER_NAMES}")
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate parameters in {names}")
        return super().__new__(cls, names)


@dataclass(frozen=True)
class FimAnalysis:
    determinant: float
    eigenvalues: np.ndarray
    singular_values: np.ndarray
    rank: int
    crb: Optional[Dict[str, float]]

    @property
    def singular(self) -> bool:
        return self.crb is None

    def as_dict(self) -> dict:
        return {
            "determinant": self.determinant,
            "eigenvalues": self.eigenvalues.tolist(),
            "rank": self.rank,
            "singular": self.singular,
            "crb": self.crb,
        }


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    params: Tuple[str, ...]
    matrix: np.ndarray
    n_repetitions: int = 1

    def __post_init__(self):
        object.__setattr__(self, "params", ParameterSet(self.params))
        m = np.asarray(self.matrix, dtype=float)
        k = len(self.params)
        if m.shape != (k, k):
            raise ConfigError(f"Fisher matrix must be {k}x{k}, got {m.shape}")
        if self.n_repetitions < 1:
            raise ConfigError("n_repetitions must be positive")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    def __getitem__(self, key):
        if isinstance(key, str):
            key = (key, key)
        i, j = (self.params.index(k) for k in key)
        return float(self.matrix[i, j])

    def submatrix(self, names: Sequence[str]) -> "FisherMatrix":
        names = ParameterSet(names)
        idx = [self.params.index(n) for n in names]
        return FisherMatrix(names, self.matrix[np.ix_(idx, idx)], self.n_repetitions)

    def analysis(self) -> FimAnalysis:
        return fim_analysis(self)


def fim_analysis(F: FisherMatrix) -> FimAnalysis:
    """Determinant, eigenvalues, numerical rank and, when invertible, the CRB variances."""
    m = F.matrix
    sv = np.linalg.svd(m, compute_uv=False)
    top = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > RANK_TOL * top)) if top > 0 else 0
    crb = None
    if rank == len(F.params):
        inv = np.linalg.inv(m)
        crb = {name: float(inv[i, i]) / F.n_repetitions for i, name in enumerate(F.params)}
    return FimAnalysis(float(np.linalg.det(m)), np.linalg.eigvalsh(m), sv, rank, crb)


def step_size(name: str, p: PhysicalParams, factor: float = STEP_FACTOR) -> float:
    scale = {"delta": 1.0 / p.sigma, "alpha": 0.05, "sigma": p.sigma / 20.0, "gamma": 0.05}[name]
    h = factor * max(abs(p.get(name)), scale)
    if name in _UNIT_INTERVAL:
        value = p.get(name)
        if value <= 0.0 or value >= 1.0:
            raise BoundaryError(f"{name}={value} sits on its domain edge; central differences are undefined")
        h = min(h, 0.5 * min(value, 1.0 - value))
    return h


def _probability_function(model, p: PhysicalParams) -> Callable[[PhysicalParams], np.ndarray]:
    if isinstance(model, Measurement):
        n_bins = model.n_bins(p)
        return lambda q: model.probabilities(q, n_bins)
    base = model(p)
    if isinstance(base, OutcomeDistribution):
        outcomes = base.outcomes

        def aligned(q):
            d = model(q)
            if d.outcomes == outcomes:
                return np.asarray(d.probabilities)
            lookup = d.as_dict()
            return np.array([lookup.get(o, 0.0) for o in outcomes])

        return aligned
    return lambda q: np.asarray(model(q), dtype=float)


def _check_degenerate(zero_mask, evaluations):
    if not np.any(zero_mask):
        return
    for probs in evaluations:
        if np.sum(probs[zero_mask]) > 0.1 * np.sum(probs):
            warnings.warn("more than 10% of the perturbed probability mass sits on outcomes that vanish "
                          "at the evaluation point; the Fisher matrix is unreliable here",
                          DegenerateDistributionWarning, stacklevel=3)
            return


def fim_numeric(model, p: PhysicalParams, params=("delta",), p_floor: float = P_FLOOR) -> FisherMatrix:
    """Fisher matrix of the outcome distribution produced by ``model`` at ``p``.

    ``model`` is a :class:`Measurement` or any callable mapping parameters to
    an :class:`OutcomeDistribution` or to a fixed-length probability array.
    """
    ps = ParameterSet(params)
    prob = _probability_function(model, p)
    p0 = prob(p)
    k = len(ps)
    steps = [step_size(name, p) for name in ps]
    plus, minus = [], []
    for name, h in zip(ps, steps):
        v = p.get(name)
        plus.append(prob(p.replace(**{name: v + h})))
        minus.append(prob(p.replace(**{name: v - h})))
    deriv = np.array([(a - b) / (2.0 * h) for a, b, h in zip(plus, minus, steps)])

    live = p0 > p_floor
    F = (deriv[:, live] / p0[live]) @ deriv[:, live].T

    dead = ~live
    _check_degenerate(dead, plus + minus)
    if np.any(dead):
        # double zero P ~ (v.x)^2 contributes twice its Hessian
        H = np.zeros((k, k))
        hc = [step_size(name, p, CURV_FACTOR) for name in ps]
        for i in range(k):
            vi = p.get(ps[i])
            up = prob(p.replace(**{ps[i]: vi + hc[i]}))[dead]
            down = prob(p.replace(**{ps[i]: vi - hc[i]}))[dead]
            H[i, i] = np.sum(np.maximum((up - 2.0 * p0[dead] + down) / hc[i] ** 2, 0.0))
        for i in range(k):
            for j in range(i + 1, k):
                vi, vj = p.get(ps[i]), p.get(ps[j])
                hi, hj = hc[i], hc[j]
                pp = prob(p.replace(**{ps[i]: vi + hi, ps[j]: vj + hj}))[dead]
                pm = prob(p.replace(**{ps[i]: vi + hi, ps[j]: vj - hj}))[dead]
                mp = prob(p.replace(**{ps[i]: vi - hi, ps[j]: vj + hj}))[dead]
                mm = prob(p.replace(**{ps[i]: vi - hi, ps[j]: vj - hj}))[dead]
                H[i, j] = H[j, i] = np.sum(pp - pm - mp + mm) / (4.0 * hi * hj)
        F = F + 2.0 * H
    return FisherMatrix(ps, F)


def cfi_delta(model, p: PhysicalParams) -> float:
    """Single-parameter classical Fisher information for the delay."""
    return fim_numeric(model, p, ("delta",))["delta"]


def cfi_delta_grid(measurement: Measurement, p: PhysicalParams, deltas, max_cells: int = 4_000_000) -> np.ndarray:
    """Vectorized :func:`cfi_delta` over many delays (other parameters from ``p``)."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    out = np.empty(deltas.size)
    if deltas.size == 0:
        return out
    n_cols = len(measurement.outcomes(measurement.n_bins(p.replace(delta=float(np.max(np.abs(deltas)))))))
    chunk = max(1, max_cells // (3 * n_cols))
    for start in range(0, deltas.size, chunk):
        d = deltas[start:start + chunk]
        h = STEP_FACTOR * np.maximum(np.abs(d), 1.0 / p.sigma)
        n_bins = measurement.n_bins(p.replace(delta=float(np.max(np.abs(d) + h))))
        grid = measurement.probability_grid(p, np.concatenate([d, d + h[:], d - h]), n_bins)
        m = d.size
        p0, pp, pm = grid[:m], grid[m:2 * m], grid[2 * m:]
        deriv = (pp - pm) / (2.0 * h[:, None])
        live = p0 > P_FLOOR
        safe = np.where(live, p0, 1.0)
        terms = np.where(live, deriv * deriv / safe, 0.0)
        total = terms.sum(axis=1)
        rows = np.flatnonzero(~live.all(axis=1))
        if rows.size:
            dr = d[rows]
            hc = CURV_FACTOR * np.maximum(np.abs(dr), 1.0 / p.sigma)
            side = measurement.probability_grid(p, np.concatenate([dr + hc, dr - hc]), n_bins)
            up, down = side[:rows.size], side[rows.size:]
            dead = ~live[rows]
            curv = np.where(dead, np.maximum((up - 2.0 * p0[rows] + down) / (hc * hc)[:, None], 0.0), 0.0)
            total[rows] += 2.0 * curv.sum(axis=1)
        out[start:start + chunk] = total
    return out


# ---------------------------------------------------------------------------
# closed forms without time resolution
# ---------------------------------------------------------------------------

def _overlap_terms(p: PhysicalParams):
    x = 2.0 * (p.sigma * p.delta) ** 2
    y = math.exp(-x)            # e^{-2 sigma^2 delta^2}
    e1 = math.expm1(-x)         # y - 1 without cancellation
    return y, e1


def _bucket_denominator(p: PhysicalParams, y: float, e1: float) -> float:
    # alpha^2 (g-1) y^2 - 4 alpha g y + (3g+1), expanded about y = 1
    a, g = p.alpha, p.gamma
    return ((1.0 - a) * (1.0 + a + 3.0 * g - a * g)
            + e1 * (2.0 * a * a * (g - 1.0) - 4.0 * a * g)
            + a * a * (g - 1.0) * e1 * e1)


def cfi_bucket_notr(p: PhysicalParams) -> float:
    """Delay information of bucket detectors without time resolution (closed form)."""
    a, g, s, d = p.alpha, p.gamma, p.sigma, p.delta
    y, e1 = _overlap_terms(p)
    denom = _bucket_denominator(p, y, e1)
    if denom <= 0.0:
        return 4.0 * s * s * (1.0 - g) ** 2 if (a == 1.0 and d == 0.0) else 0.0
    return 16.0 * a * a * (1.0 - g) ** 2 * (1.0 + g) * d * d * s ** 4 * y * y / denom


def cfi_nr_notr(p: PhysicalParams) -> float:
    """Delay information of number-resolving detectors without time resolution (closed form)."""
    a, g, s, d = p.alpha, p.gamma, p.sigma, p.delta
    y, e1 = _overlap_terms(p)
    one_minus = (1.0 - a) - a * e1          # 1 - alpha y
    denom = one_minus * (1.0 + a * y)
    if denom <= 0.0:
        return 4.0 * s * s * (1.0 - g) ** 2 if (a == 1.0 and d == 0.0) else 0.0
    return 16.0 * a * a * (1.0 - g) ** 2 * d * d * s ** 4 * y * y / denom


def closed_form_fim_bucket(p: PhysicalParams) -> FisherMatrix:
    """4x4 Fisher matrix over (delta, alpha, sigma, gamma) for bucket detectors, no timing."""
    a, g, s, d = p.alpha, p.gamma, p.sigma, p.delta
    if g >= 1.0:
        raise BoundaryError("gamma = 1: no detections, the Fisher matrix is undefined")
    y, e1 = _overlap_terms(p)
    denom = _bucket_denominator(p, y, e1)
    if denom <= 0.0:
        raise BoundaryError("alpha = 1 at delta = 0: the closed-form matrix is singular")
    kappa = (1.0 - g) ** 2 * (1.0 + g) * y * y / denom
    chi = (1.0 - g) * y / (a * (g - 1.0) * y - (3.0 * g + 1.0))
    gg = 8.0 / ((1.0 - g) * (3.0 * g + 1.0 + a * (1.0 - g) * y))
    m = np.array([
        [16 * a * a * d * d * kappa * s ** 4, -4 * a * d * kappa * s * s, 16 * a * a * d ** 3 * kappa * s ** 3, 8 * a * d * s * s * chi],
        [-4 * a * d * kappa * s * s, kappa, -4 * a * d * d * kappa * s, -2 * chi],
        [16 * a * a * d ** 3 * kappa * s ** 3, -4 * a * d * d * kappa * s, 16 * a * a * d ** 4 * kappa * s * s, 8 * a * d * d * s * chi],
        [8 * a * d * s * s * chi, -2 * chi, 8 * a * d * d * s * chi, gg],
    ])
    return FisherMatrix(PARAMETER_NAMES, m)


def closed_form_fim_nr(p: PhysicalParams) -> FisherMatrix:
    """4x4 Fisher matrix over (delta, alpha, sigma, gamma) for number-resolving detectors, no timing."""
    a, g, s, d = p.alpha, p.gamma, p.sigma, p.delta
    if g >= 1.0 or g <= 0.0:
        raise BoundaryError(f"gamma={g}: the loss information 2/(gamma - gamma^2) diverges")
    y, e1 = _overlap_terms(p)
    denom = ((1.0 - a) - a * e1) * (1.0 + a * y)
    if denom <= 0.0:
        raise BoundaryError("alpha = 1 at delta = 0: the closed-form matrix is singular")
    xi = (1.0 - g) ** 2 * y * y / denom
    m = np.array([
        [16 * a * a * d * d * xi * s ** 4, -4 * a * d * xi * s * s, 16 * a * a * d ** 3 * xi * s ** 3, 0.0],
        [-4 * a * d * xi * s * s, xi, -4 * a * d * d * xi * s, 0.0],
        [16 * a * a * d ** 3 * xi * s ** 3, -4 * a * d * d * xi * s, 16 * a * a * d ** 4 * xi * s * s, 0.0],
        [0.0, 0.0, 0.0, 2.0 / (g - g * g)],
    ])
    return FisherMatrix(PARAMETER_NAMES, m)


# ---------------------------------------------------------------------------
# quantum bounds
# ---------------------------------------------------------------------------

def qfi(sigma: float) -> float:
    """Quantum Fisher information of the delay for the pure biphoton state."""
    return 4.0 * sigma * sigma


def qfi_two_photon(sigma: float, gamma: float) -> float:
    """QFI restricted to events where both photons survive."""
    return 4.0 * sigma * sigma * (1.0 - gamma) ** 2


def relative_information(F: float, sigma: float, gamma: float) -> float:
    if gamma >= 1.0:
        raise ParameterError("relative information is undefined at gamma = 1")
    return F / qfi_two_photon(sigma, gamma)


# ---------------------------------------------------------------------------
# optimal operating point
# ---------------------------------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo: float, hi: float, tol: float):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def delta_search_range(measurement: Measurement, p: PhysicalParams):
    """``(delta_max, coarse_step)`` for optimal-delay and likelihood searches."""
    inv = 1.0 / p.sigma
    T = measurement.bin_width
    if T is None:
        return 5.0 * inv, inv / 40.0
    return 5.0 * inv + 2.0 * T, min(T, inv) / 40.0


def optimal_delta(measurement: Measurement, p: PhysicalParams):
    """Delay in ``[0, delta_max]`` maximizing the delay information; returns ``(delta, F)``.

    Coarse grid, then golden-section refinement to ``1e-6 / sigma``.  Ties
    resolve toward the smaller delay.
    """
    delta_max, step = delta_search_range(measurement, p)
    grid = np.arange(0.0, delta_max + 0.5 * step, step)
    values = cfi_delta_grid(measurement, p, grid)
    # periodic information (no-HOM) has equal maxima up to rounding
    i = int(np.argmax(values >= np.max(values) * (1.0 - TIE_TOL)))
    best_d, best_f = float(grid[i]), float(values[i])
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, grid.size - 1)])
    if hi > lo:
        d, f = golden_section_max(lambda x: cfi_delta(measurement, p.replace(delta=x)), lo, hi, 1e-6 / p.sigma)
        if f > best_f:
            best_d, best_f = d, f
    if best_f < 1e-12 * p.sigma ** 2:
        warnings.warn(f"delay information is flat (max {best_f:.3g}) for {measurement.label}",
                      FlatFunctionWarning, stacklevel=2)
    return best_d, best_f
