"""Maximum-likelihood estimation from outcome histograms, with Cramer-Rao comparison."""

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Union

import numpy as np
from scipy.optimize import minimize

from .binned import Measurement, Protocol
from .errors import (ConfigError, DegenerateDataError, SearchBoundaryWarning,
                     SingularInformationError)
from .information import (FisherMatrix, ParameterSet, delta_search_range, fim_analysis,
                          fim_numeric, golden_section_max, step_size)
from .model import PARAMETER_NAMES, PhysicalParams
from .simulate import CountsHistogram

DOMAIN_MARGIN = 1e-6
FLAT_TOL = 1e-10
N_STARTS = 3


@dataclass(frozen=True, eq=False)
class EstimationResult:
    estimates: Dict[str, float]
    log_likelihood: float
    observed_information: FisherMatrix
    crb_variance: Optional[Dict[str, float]]
    n_trials: int
    params: PhysicalParams

    def as_dict(self) -> dict:
        obs = self.observed_information
        return {
            "estimates": dict(self.estimates),
            "log_likelihood": self.log_likelihood,
            "observed_information": {"params": list(obs.params), "matrix": obs.matrix.tolist()},
            "crb_variance": self.crb_variance,
            "crb_std": None if self.crb_variance is None else
            {k: math.sqrt(v) for k, v in self.crb_variance.items()},
            "n_trials": self.n_trials,
        }


def _known_params(known) -> PhysicalParams:
    if isinstance(known, PhysicalParams):
        return known
    if isinstance(known, Mapping):
        return PhysicalParams(**{k: v for k, v in known.items() if k in PARAMETER_NAMES})
    raise ConfigError("known parameters must be a PhysicalParams or a mapping")


def _check_measurement(counts: CountsHistogram, measurement: Optional[Measurement]) -> Measurement:
    if measurement is not None and measurement != counts.measurement:
        raise ConfigError(f"counts were recorded with {counts.measurement.label}, "
                          f"not with the requested {measurement.label} configuration")
    return counts.measurement


def _loglik_rows(counts: np.ndarray, probs: np.ndarray) -> np.ndarray:
    probs = np.atleast_2d(probs)
    hit = counts > 0
    c = counts[hit].astype(float)
    p = probs[:, hit]
    with np.errstate(divide="ignore"):
        return np.log(p) @ c


def log_likelihood(counts: CountsHistogram, candidate: PhysicalParams,
                   measurement: Optional[Measurement] = None) -> float:
    """Multinomial log-likelihood (without the combinatorial constant)."""
    m = _check_measurement(counts, measurement)
    probs = m.probabilities(candidate, counts.n_bins)
    return float(_loglik_rows(counts.counts, probs)[0])


def _loglik_delta_grid(counts: CountsHistogram, base: PhysicalParams, deltas) -> np.ndarray:
    probs = counts.measurement.probability_grid(base, deltas, counts.n_bins)
    return _loglik_rows(counts.counts, probs)


def _observed_information(counts, estimate: PhysicalParams, names) -> FisherMatrix:
    """Per-trial observed information from central second differences of the log-likelihood."""
    ll = lambda q: log_likelihood(counts, q)  # noqa: E731
    k = len(names)
    steps = [step_size(n, estimate) for n in names]
    f0 = ll(estimate)
    H = np.zeros((k, k))
    for i, (a, ha) in enumerate(zip(names, steps)):
        va = estimate.get(a)
        H[i, i] = (ll(estimate.replace(**{a: va + ha})) - 2.0 * f0 + ll(estimate.replace(**{a: va - ha}))) / ha ** 2
        for j in range(i + 1, k):
            b, hb = names[j], steps[j]
            vb = estimate.get(b)
            pp = ll(estimate.replace(**{a: va + ha, b: vb + hb}))
            pm = ll(estimate.replace(**{a: va + ha, b: vb - hb}))
            mp = ll(estimate.replace(**{a: va - ha, b: vb + hb}))
            mm = ll(estimate.replace(**{a: va - ha, b: vb - hb}))
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * ha * hb)
    n = max(counts.n_trials, 1)
    return FisherMatrix(names, -H / n, n)


def _require_information(counts: CountsHistogram):
    if counts.n_trials == 0:
        raise DegenerateDataError("the histogram is empty")


def mle_delta(counts: CountsHistogram, known) -> EstimationResult:
    """Delay estimate with visibility, width and loss held at ``known``.

    HOM protocols only see ``|delta|`` and search ``[0, delta_max]``; the
    no-HOM protocol searches the signed interval.  Equal likelihoods resolve
    toward the smaller ``|delta|``.
    """
    _require_information(counts)
    base = _known_params(known)
    m = counts.measurement
    delta_max, _ = delta_search_range(m, base)
    step = (1.0 / base.sigma) / 200.0
    half = np.arange(0.0, delta_max + 0.5 * step, step)
    signed = m.protocol is Protocol.NOHOM
    grid = np.concatenate([-half[:0:-1], half]) if signed else half
    values = _loglik_delta_grid(counts, base, grid)
    top = np.max(values)
    if not np.isfinite(top):
        raise DegenerateDataError("every candidate delay gives zero probability to the observed counts")
    finite = values[np.isfinite(values)]
    if top - np.min(finite) <= FLAT_TOL * max(1.0, abs(top)) and finite.size == values.size:
        raise DegenerateDataError("the likelihood does not depend on the delay for these counts")

    near_top = values >= top - FLAT_TOL * max(1.0, abs(top))
    # among tied maxima prefer the smallest |delta|
    candidates = np.flatnonzero(near_top)
    i = int(candidates[np.argmin(np.abs(grid[candidates]))])
    best_d, best_ll = float(grid[i]), float(values[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])
    d, f = golden_section_max(lambda x: log_likelihood(counts, base.replace(delta=x)), lo, hi, 1e-6 / base.sigma)
    if f > best_ll:
        best_d, best_ll = d, f
    if abs(best_d) >= delta_max - step:
        warnings.warn(f"delay estimate {best_d:.6g} sits at the search edge {delta_max:.6g}",
                      SearchBoundaryWarning, stacklevel=2)

    estimate = base.replace(delta=best_d)
    observed = _observed_information(counts, estimate, ("delta",))
    F = float(fim_numeric(m, estimate, ("delta",)).matrix[0, 0])
    crb = {"delta": 1.0 / (F * counts.n_trials)} if F > 0 else None
    return EstimationResult({"delta": best_d}, best_ll, observed, crb, counts.n_trials, estimate)


# ---------------------------------------------------------------------------
# joint estimation
# ---------------------------------------------------------------------------

def _bounds(name: str, base: PhysicalParams, m: Measurement):
    if name == "delta":
        dmax, _ = delta_search_range(m, base)
        return (-dmax if m.protocol is Protocol.NOHOM else 0.0), dmax
    if name in ("alpha", "gamma"):
        return DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN
    return base.sigma / 10.0, base.sigma * 10.0


def _to_unit(name, value, base):
    # optimizer coordinates of comparable scale
    if name == "delta":
        return value * base.sigma
    if name == "sigma":
        return math.log(value / base.sigma)
    return value


def _from_unit(name, u, base):
    if name == "delta":
        return u / base.sigma
    if name == "sigma":
        return base.sigma * math.exp(u)
    return u


def _coarse_values(name, base, m):
    lo, hi = _bounds(name, base, m)
    if name == "delta":
        return np.linspace(lo, hi, 41 if lo < 0 else 25)
    if name == "sigma":
        return base.sigma * np.array([0.5, 0.7, 1.0, 1.4, 2.0])
    return np.array([0.02, 0.2, 0.4, 0.6, 0.8, 0.9, 0.98])


def _coarse_starts(counts, names, base, m, initial):
    """Best points of a coarse grid over the free parameters (delta grid vectorized)."""
    others = [n for n in names if n != "delta"]
    deltas = _coarse_values("delta", base, m) if "delta" in names else np.array([base.delta])
    scored = []
    for combo in itertools.product(*(_coarse_values(n, base, m) for n in others)):
        q = base.replace(**dict(zip(others, combo)))
        ll = _loglik_delta_grid(counts, q, deltas)
        for d, v in zip(deltas, ll):
            if np.isfinite(v):
                scored.append((float(v), q.replace(delta=float(d))))
    scored.sort(key=lambda t: -t[0])
    starts = [q for _, q in scored[:N_STARTS]]
    if initial is not None:
        starts.insert(0, _known_params(initial))
    if not starts:
        raise DegenerateDataError("no candidate parameters give the observed counts nonzero probability")
    return starts


def mle_joint(counts: CountsHistogram, params, known, initial=None) -> EstimationResult:
    """Joint maximum likelihood over ``params`` with the rest fixed at ``known``.

    Nelder-Mead restarted from the best coarse-grid points.  The Fisher matrix
    at the optimum is then checked; a rank below the number of requested
    parameters means the request is not identifiable and raises
    :class:`SingularInformationError`.
    """
    _require_information(counts)
    names = ParameterSet(params)
    base = _known_params(known)
    m = counts.measurement
    bounds = [_bounds(n, base, m) for n in names]
    unit_bounds = [(_to_unit(n, lo, base), _to_unit(n, hi, base)) for n, (lo, hi) in zip(names, bounds)]

    def make(u):
        values = {}
        for n, x, (lo, hi) in zip(names, u, bounds):
            values[n] = float(np.clip(_from_unit(n, x, base), lo, hi))
        return base.replace(**values)

    def objective(u):
        v = log_likelihood(counts, make(u))
        return -v if np.isfinite(v) else 1e300

    best = None
    for start in _coarse_starts(counts, names, base, m, initial):
        u0 = [_to_unit(n, start.get(n), base) for n in names]
        res = minimize(objective, u0, method="Nelder-Mead", bounds=unit_bounds,
                       options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 4000 * len(names)})
        if best is None or res.fun < best.fun:
            best = res
    estimate = make(best.x)
    if best.fun >= 1e300:
        raise DegenerateDataError("no candidate parameters give the observed counts nonzero probability")

    fim = fim_numeric(m, estimate, names)
    analysis = fim_analysis(fim)
    if analysis.rank < len(names):
        raise SingularInformationError(
            f"parameters {tuple(names)} are not identifiable from {m.label} data "
            f"(Fisher rank {analysis.rank} < {len(names)})", analysis)
    observed = _observed_information(counts, estimate, names)
    crb = {k: v / counts.n_trials for k, v in analysis.crb.items()}
    return EstimationResult({n: estimate.get(n) for n in names}, -float(best.fun), observed,
                            crb, counts.n_trials, estimate)


def estimate(counts: CountsHistogram, params: Union[str, tuple], known, initial=None) -> EstimationResult:
    """Dispatch to :func:`mle_delta` for the delay alone, :func:`mle_joint` otherwise."""
    names = ParameterSet(params)
    if tuple(names) == ("delta",):
        return mle_delta(counts, known)
    return mle_joint(counts, names, known, initial)
