"""Independent numerical oracles: adaptive quadrature and brute-force differentiation.

Nothing here touches the error-function kernels.  Densities are evaluated in
their literal single-exponential form and binned probabilities are obtained
by integrating them against the triangular bin weights, so agreement with
:mod:`homfisher.binned` is a genuine cross-check.
"""

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import binned as B
from .binned import Measurement, Outcome, Protocol
from .errors import ConfigError, ConvergenceError
from .information import FisherMatrix, ParameterSet, step_size
from .model import PhysicalParams

# 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1] (nonnegative half)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ConfigError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ConfigError("max_subdivisions must be positive")


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = np.asarray(f(mid + half * _NODES), dtype=float)
    if not np.all(np.isfinite(y)):
        raise ConvergenceError("integrand is not finite", {"interval": (a, b)})
    k = half * float(_KRONROD @ y)
    g = half * float(_GAUSS @ y)
    return k, abs(k - g)


def _vectorize(f):
    def g(x):
        try:
            out = np.asarray(f(x), dtype=float)
            if out.shape == x.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(t))) for t in x])
    return g


def _finite_pieces(a, b, points):
    """Map the range to finite pieces, each given as (integrand transform, lo, hi)."""
    cuts = sorted(float(x) for x in (points or ()) if a < x < b)
    edges = [a] + cuts + [b]
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isfinite(lo) and math.isfinite(hi):
            pieces.append((None, lo, hi))
        elif math.isfinite(lo):
            pieces.append(("right", lo, hi))
        elif math.isfinite(hi):
            pieces.append(("left", lo, hi))
        else:
            pieces.append(("both", lo, hi))
    return pieces


def _transformed(f, kind, anchor, scale):
    # right: x = anchor + scale*u/(1-u), left: the mirror image, both: x = scale*u/(1-u^2).
    # Nodes that round onto u = +-1 sit at infinity, where a convergent integrand vanishes.
    if kind is None:
        return f

    def one_sided(u, sign):
        v = 1.0 - u
        safe = np.where(v > 0.0, v, 1.0)
        x = anchor + sign * scale * u / safe
        return np.where(v > 0.0, f(x) * scale / (safe * safe), 0.0)

    def two_sided(u):
        v = 1.0 - u * u
        safe = np.where(v > 0.0, v, 1.0)
        x = anchor + scale * u / safe
        return np.where(v > 0.0, f(x) * scale * (1.0 + u * u) / (safe * safe), 0.0)

    if kind == "right":
        return lambda u: one_sided(u, 1.0)
    if kind == "left":
        return lambda u: one_sided(u, -1.0)
    return two_sided


def quad_integrate(f: Callable, a: float, b: float, spec: QuadratureSpec = QuadratureSpec(),
                   points: Optional[Sequence[float]] = None, scale: float = 1.0):
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``; returns ``(value, error)``.

    Infinite limits are mapped onto finite intervals through ``x = x0 + scale*u/(1-u)``,
    so ``scale`` should be comparable with the width of the integrand.
    ``points`` marks interior features (peaks, kinks) where the range is split.
    """
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if a > b:
        a, b, sign = b, a, -1.0
    g = _vectorize(f)
    intervals = []
    for kind, lo, hi in _finite_pieces(a, b, points):
        if kind == "right":
            h, ulo, uhi, anchor = _transformed(g, kind, lo, scale), 0.0, 1.0, lo
        elif kind == "left":
            h, ulo, uhi, anchor = _transformed(g, kind, hi, scale), 0.0, 1.0, hi
        elif kind == "both":
            h, ulo, uhi, anchor = _transformed(g, kind, 0.0, scale), -1.0, 1.0, 0.0
        else:
            h, ulo, uhi = g, lo, hi
        intervals.append((h, ulo, uhi))

    heap = []
    total = 0.0
    error = 0.0
    for h, lo, hi in intervals:
        v, e = _gk15(h, lo, hi)
        total += v
        error += e
        heapq.heappush(heap, (-e, lo, hi, v, id(h), h))
    n_sub = len(heap)
    while error > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if n_sub >= spec.max_subdivisions:
            raise ConvergenceError("adaptive quadrature did not converge", {
                "value": sign * total, "error": error, "subdivisions": n_sub,
                "abs_tol": spec.abs_tol, "rel_tol": spec.rel_tol})
        neg_e, lo, hi, v, _, h = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise ConvergenceError("interval cannot be bisected further", {
                "value": sign * total, "error": error, "at": lo})
        v1, e1 = _gk15(h, lo, mid)
        v2, e2 = _gk15(h, mid, hi)
        total += v1 + v2 - v
        error += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1, id(h), h))
        heapq.heappush(heap, (-e2, mid, hi, v2, id(h), h))
        n_sub += 1
    # recompute the sums to shed accumulated cancellation
    total = math.fsum(item[3] for item in heap)
    error = math.fsum(-item[0] for item in heap)
    return sign * total, error


# ---------------------------------------------------------------------------
# literal-form densities
# ---------------------------------------------------------------------------

def literal_coincidence_density(p: PhysicalParams, tau):
    """Single-exponential form with each product folded into one exponent."""
    return _literal_pair(p, tau, -1.0)


def literal_bunching_density(p: PhysicalParams, tau):
    return _literal_pair(p, tau, 1.0)


def _literal_pair(p, tau, sign):
    tau = np.asarray(tau, dtype=float)
    s2, d = p.sigma ** 2, p.delta
    base = -2.0 * s2 * (d + tau) ** 2
    pre = p.sigma / (2.0 * math.sqrt(2.0 * math.pi))
    val = pre * (np.exp(base) + np.exp(base + 8.0 * d * s2 * tau)
                 + sign * 2.0 * p.alpha * np.exp(base + 4.0 * d * s2 * tau))
    return np.maximum(val, 0.0)


def literal_nohom_density(p: PhysicalParams, tau):
    tau = np.asarray(tau, dtype=float)
    return p.sigma * math.sqrt(2.0 / math.pi) * np.exp(-2.0 * p.sigma ** 2 * (tau - p.delta) ** 2)


def _features(p: PhysicalParams):
    d = abs(p.delta)
    return sorted({-d, 0.0, d})


def _weighted_integral(density, p, a, b, weight, spec):
    """Integral of ``weight(tau) * density(p, tau)`` over ``[a, b]`` with feature splits."""
    pts = [x for x in _features(p) if a < x < b]
    val, _ = quad_integrate(lambda t: weight(t) * density(p, t), a, b, spec, points=pts, scale=p.width)
    return val


def _folded_binned(density, p, T, n, spec):
    # twice the positive-tau integral against the tent
    rise = lambda t: (t - (n - 1) * T) / T  # noqa: E731
    fall = lambda t: ((n + 1) * T - t) / T  # noqa: E731
    out = _weighted_integral(density, p, n * T, (n + 1) * T, fall, spec)
    if n > 0:
        out += _weighted_integral(density, p, (n - 1) * T, n * T, rise, spec)
    return 2.0 * out


def oracle_binned_coincidence(p: PhysicalParams, T: float, n: int, spec: QuadratureSpec = QuadratureSpec()):
    return _folded_binned(literal_coincidence_density, p, T, int(n), spec)


def oracle_binned_bunching(p: PhysicalParams, T: float, n: int, spec: QuadratureSpec = QuadratureSpec()):
    return _folded_binned(literal_bunching_density, p, T, int(n), spec)


def oracle_binned_nohom(p: PhysicalParams, T: float, n: int, spec: QuadratureSpec = QuadratureSpec()):
    n = int(n)
    rise = lambda t: (t - (n - 1) * T) / T  # noqa: E731
    fall = lambda t: ((n + 1) * T - t) / T  # noqa: E731
    return (_weighted_integral(literal_nohom_density, p, (n - 1) * T, n * T, rise, spec)
            + _weighted_integral(literal_nohom_density, p, n * T, (n + 1) * T, fall, spec))


def oracle_total(density, p: PhysicalParams, spec: QuadratureSpec = QuadratureSpec()):
    """Integral of a density over the real line."""
    val, _ = quad_integrate(lambda t: density(p, t), -math.inf, math.inf, spec,
                            points=_features(p), scale=p.width)
    return val


def _oracle_overflow(density, p, T, n_bins, spec, folded=True):
    # mass landing more than n_bins apart: ramp on the last partial bin, then everything beyond
    def side(sign):
        q = p.replace(delta=sign * p.delta)
        ramp = _weighted_integral(density, q, n_bins * T, (n_bins + 1) * T, lambda t: (t - n_bins * T) / T, spec)
        far, _ = quad_integrate(lambda t: density(q, t), (n_bins + 1) * T, math.inf, spec,
                                points=[x for x in _features(q) if x > (n_bins + 1) * T], scale=p.width)
        return ramp + far
    if folded:
        return 2.0 * side(1.0)
    return side(1.0) + side(-1.0)


def oracle_probabilities(measurement: Measurement, p: PhysicalParams, n_bins: Optional[int] = None,
                         spec: QuadratureSpec = QuadratureSpec()) -> np.ndarray:
    """Outcome probabilities in the layout of ``measurement.outcomes(n_bins)``, by quadrature."""
    if measurement.timed and n_bins is None:
        n_bins = measurement.n_bins(p)
    g = p.gamma
    both, one, zero = (1.0 - g) ** 2, 2.0 * g * (1.0 - g), g * g
    nr = measurement.detector.number_resolving
    T = measurement.bin_width
    out = []
    for o in measurement.outcomes(n_bins):
        k = o.kind
        if k == B.ZERO_CLICKS:
            v = zero
        elif k == B.TWO_CLICKS:
            v = both
        elif k == B.ONE_CLICK:
            if measurement.protocol is Protocol.NOHOM or nr:
                v = one
            else:
                pc = oracle_total(literal_coincidence_density, p, spec)
                pb = oracle_total(literal_bunching_density, p, spec)
                v = one * pc + (1.0 - g * g) * pb
        elif k == B.TWO_CLICKS_COINCIDENCE:
            v = both * oracle_total(literal_coincidence_density, p, spec)
        elif k == B.TWO_CLICKS_BUNCH:
            v = both * oracle_total(literal_bunching_density, p, spec)
        elif k == B.COINCIDENCE_SEP:
            v = both * oracle_binned_coincidence(p, T, o.index, spec)
        elif k == B.BUNCH_SEP:
            v = both * oracle_binned_bunching(p, T, o.index, spec)
        elif k == B.NOHOM_SEP:
            v = both * oracle_binned_nohom(p, T, o.index, spec)
        elif k == B.OVERFLOW:
            if measurement.protocol is Protocol.NOHOM:
                v = both * _oracle_overflow(literal_nohom_density, p, T, n_bins, spec, folded=False)
            else:
                v = both * _oracle_overflow(literal_coincidence_density, p, T, n_bins, spec)
                if nr:
                    v += both * _oracle_overflow(literal_bunching_density, p, T, n_bins, spec)
        else:  # pragma: no cover - layout kinds are exhaustive
            raise ConfigError(f"unhandled outcome {o}")
        out.append(v)
    return np.array(out)


# ---------------------------------------------------------------------------
# differentiation oracles
# ---------------------------------------------------------------------------

def richardson_derivative(f: Callable[[float], np.ndarray], x: float, h: float, levels: int = 4):
    """Central difference refined by Richardson extrapolation over ``h, h/2, ...``."""
    table = []
    for i in range(levels):
        hi = h / 2 ** i
        row = [(np.asarray(f(x + hi)) - np.asarray(f(x - hi))) / (2.0 * hi)]
        for j in range(1, i + 1):
            factor = 4.0 ** j
            row.append((factor * row[j - 1] - table[i - 1][j - 1]) / (factor - 1.0))
        table.append(row)
    return table[-1][-1]


def _oracle_step(name, p):
    # much larger than the production step; extrapolation removes the truncation error
    return 200.0 * step_size(name, p)


def fim_brute_force(measurement: Measurement, p: PhysicalParams, params=("delta",),
                    spec: QuadratureSpec = QuadratureSpec(), p_floor: float = 1e-14) -> FisherMatrix:
    """Fisher matrix from quadrature probabilities and Richardson-extrapolated derivatives."""
    ps = ParameterSet(params)
    n_bins = measurement.n_bins(p)
    prob = lambda q: oracle_probabilities(measurement, q, n_bins, spec)  # noqa: E731
    p0 = prob(p)
    derivs = []
    for name in ps:
        v = p.get(name)
        h = _oracle_step(name, p)
        if name in ("alpha", "gamma"):
            h = min(h, 0.5 * min(v, 1.0 - v))
        if name == "delta" and measurement.protocol is Protocol.HOM and abs(v) < h:
            h = max(abs(v), 1e-3 / p.sigma)
        derivs.append(richardson_derivative(lambda x: prob(p.replace(**{name: x})), v, h))
    d = np.array(derivs)
    live = p0 > p_floor
    return FisherMatrix(ps, (d[:, live] / p0[live]) @ d[:, live].T)


def score_integral_cfi(density: Callable, p: PhysicalParams, param: str = "delta",
                       spec: QuadratureSpec = QuadratureSpec(abs_tol=1e-11, rel_tol=1e-9)) -> float:
    """Continuous-outcome Fisher information ``int (d_theta f)^2 / f`` by quadrature."""
    v = p.get(param)
    h = step_size(param, p)
    fp = lambda t: density(p.replace(**{param: v + h}), t)  # noqa: E731
    fm = lambda t: density(p.replace(**{param: v - h}), t)  # noqa: E731

    def integrand(t):
        f0 = np.asarray(density(p, t), dtype=float)
        df = (np.asarray(fp(t)) - np.asarray(fm(t))) / (2.0 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(f0 > 0.0, df * df / np.where(f0 > 0.0, f0, 1.0), 0.0)

    val, _ = quad_integrate(integrand, -math.inf, math.inf, spec, points=_features(p), scale=p.width)
    return val
