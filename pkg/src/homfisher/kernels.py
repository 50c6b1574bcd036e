"""Hot numeric kernels: Gaussian masses under triangular bin weights.

Every binned probability in the package reduces to the expected value of a
"tent" weight ``max(0, 1 - |tau - n*T| / T)`` under a normal law
``N(mu, s**2)``.  That expectation is the probability that two events
separated by ``tau`` and placed uniformly inside bins of width ``T`` land
exactly ``n`` bins apart.

Two interchangeable implementations are provided: numba-compiled loops and a
pure-numpy fallback.  The numba path is used when numba imports and the
environment variable ``HOMFISHER_NUMBA`` is not ``"0"``.  Both paths evaluate
the same closed-form expressions and agree to rounding.
"""

import math
import os

import numpy as np
from scipy.special import erfc as _np_erfc

INV_SQRT2 = 1.0 / math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _numba_requested():
    return os.environ.get("HOMFISHER_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by HOMFISHER_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pure numpy implementation
# ---------------------------------------------------------------------------

def _np_edges(z):
    """erfc of |z|/sqrt2 (the small tail) and the normal pdf at each edge."""
    small = _np_erfc(np.abs(z) * INV_SQRT2)
    with np.errstate(over="ignore"):
        pdf = np.exp(-0.5 * z * z) * INV_SQRT_2PI
    return small, pdf


def _np_mass(za, zb, sa, sb):
    # Phi(zb) - Phi(za) from the small-tail erfc values of both edges
    upper = 0.5 * (sa - sb)                       # both edges right of the mean
    lower = 0.5 * (sb - sa)                       # both edges left of the mean
    straddle = 1.0 - 0.5 * sa - 0.5 * sb
    return np.where(za >= 0.0, upper, np.where(zb <= 0.0, lower, straddle))


def np_segment_integral(mu, s, a, b, c0, c1):
    mu, s, a, b, c0, c1 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, s, a, b, c0, c1)))
    za = (a - mu) / s
    zb = (b - mu) / s
    sa, pa = _np_edges(za)
    sb, pb = _np_edges(zb)
    m = _np_mass(za, zb, sa, sb)
    lin = np.where(c1 == 0.0, 0.0, c1 * s * (pa - pb))
    return (c0 + c1 * mu) * m + lin


def np_tent_mass_grid(mu, s, bin_width, n):
    """``E[tent_n]`` for each ``mu`` (rows) and each signed bin index ``n`` (columns)."""
    mu = np.asarray(mu, dtype=float).reshape(-1, 1)
    n = np.asarray(n, dtype=np.int64).reshape(1, -1)
    z_lo = ((n - 1) * bin_width - mu) / s
    z_mid = (n * bin_width - mu) / s
    z_hi = ((n + 1) * bin_width - mu) / s
    s_lo, p_lo = _np_edges(z_lo)
    s_mid, p_mid = _np_edges(z_mid)
    s_hi, p_hi = _np_edges(z_hi)
    m_rise = _np_mass(z_lo, z_mid, s_lo, s_mid)
    m_fall = _np_mass(z_mid, z_hi, s_mid, s_hi)
    rise = -z_lo * m_rise + p_lo - p_mid
    fall = z_hi * m_fall - p_mid + p_hi
    out = (s / bin_width) * (rise + fall)
    return np.maximum(out, 0.0)


def np_folded_tent_mass_grid(mu, s, bin_width, n_max):
    """Masses of the absolute bin separation ``|n|`` for ``n = 0..n_max``."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    n = np.arange(0, n_max + 1)
    out = np_tent_mass_grid(mu, s, bin_width, n)
    if n_max > 0:
        out[:, 1:] += np_tent_mass_grid(-mu, s, bin_width, n[1:])
    return out


def np_tail_beyond(mu, s, bin_width, n_max):
    """Mass of ``|n| > n_max`` under the tent-binned law centred at ``mu``."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    total = np.zeros_like(mu)
    for sign in (1.0, -1.0):
        m = sign * mu
        z0 = (n_max * bin_width - m) / s
        z1 = ((n_max + 1) * bin_width - m) / s
        s0, p0 = _np_edges(z0)
        s1, p1 = _np_edges(z1)
        ramp = (s / bin_width) * (-z0 * _np_mass(z0, z1, s0, s1) + p0 - p1)
        beyond = np.where(z1 >= 0.0, 0.5 * s1, 1.0 - 0.5 * s1)
        total += ramp + beyond
    return np.maximum(total, 0.0)


# ---------------------------------------------------------------------------
# numba implementation
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_small(z):
        return math.erfc(abs(z) * INV_SQRT2)

    @njit(cache=True)
    def _nb_pdf(z):
        return math.exp(-0.5 * z * z) * INV_SQRT_2PI

    @njit(cache=True)
    def _nb_mass(za, zb, sa, sb):
        if za >= 0.0:
            return 0.5 * (sa - sb)
        if zb <= 0.0:
            return 0.5 * (sb - sa)
        return 1.0 - 0.5 * sa - 0.5 * sb

    @njit(cache=True)
    def _nb_segment(mu, s, a, b, c0, c1):
        za = (a - mu) / s
        zb = (b - mu) / s
        m = _nb_mass(za, zb, _nb_small(za), _nb_small(zb))
        out = (c0 + c1 * mu) * m
        if c1 != 0.0:
            out += c1 * s * (_nb_pdf(za) - _nb_pdf(zb))
        return out

    @njit(cache=True)
    def _nb_segment_integral(mu, s, a, b, c0, c1):
        out = np.empty(mu.size)
        for i in range(mu.size):
            out[i] = _nb_segment(mu[i], s[i], a[i], b[i], c0[i], c1[i])
        return out

    @njit(cache=True)
    def _nb_tent_row(m, s, bin_width, n, out):
        contiguous = n.size > 1
        for j in range(1, n.size):
            if n[j] != n[j - 1] + 1:
                contiguous = False
                break
        if contiguous:
            # consecutive bins share edges, so each erfc/exp is evaluated once
            n_edges = n.size + 2
            z = np.empty(n_edges)
            sm = np.empty(n_edges)
            pdf = np.empty(n_edges)
            for e in range(n_edges):
                z[e] = ((n[0] - 1 + e) * bin_width - m) / s
                sm[e] = _nb_small(z[e])
                pdf[e] = _nb_pdf(z[e])
            for j in range(n.size):
                rise = -z[j] * _nb_mass(z[j], z[j + 1], sm[j], sm[j + 1]) + pdf[j] - pdf[j + 1]
                fall = z[j + 2] * _nb_mass(z[j + 1], z[j + 2], sm[j + 1], sm[j + 2]) - pdf[j + 1] + pdf[j + 2]
                v = (s / bin_width) * (rise + fall)
                out[j] = v if v > 0.0 else 0.0
            return
        for j in range(n.size):
            k = n[j]
            z_lo = ((k - 1) * bin_width - m) / s
            z_mid = (k * bin_width - m) / s
            z_hi = ((k + 1) * bin_width - m) / s
            s_lo = _nb_small(z_lo)
            s_mid = _nb_small(z_mid)
            s_hi = _nb_small(z_hi)
            p_lo = _nb_pdf(z_lo)
            p_mid = _nb_pdf(z_mid)
            p_hi = _nb_pdf(z_hi)
            rise = -z_lo * _nb_mass(z_lo, z_mid, s_lo, s_mid) + p_lo - p_mid
            fall = z_hi * _nb_mass(z_mid, z_hi, s_mid, s_hi) - p_mid + p_hi
            v = (s / bin_width) * (rise + fall)
            out[j] = v if v > 0.0 else 0.0

    @njit(cache=True)
    def _nb_tent_mass_grid(mu, s, bin_width, n):
        out = np.empty((mu.size, n.size))
        for i in range(mu.size):
            _nb_tent_row(mu[i], s, bin_width, n, out[i])
        return out

    @njit(cache=True)
    def _nb_folded_tent_mass_grid(mu, s, bin_width, n_max):
        n = np.arange(0, n_max + 1)
        out = np.empty((mu.size, n_max + 1))
        tmp = np.empty(n_max + 1)
        for i in range(mu.size):
            _nb_tent_row(mu[i], s, bin_width, n, out[i])
            _nb_tent_row(-mu[i], s, bin_width, n, tmp)
            for j in range(1, n_max + 1):
                out[i, j] += tmp[j]
        return out

    @njit(cache=True)
    def _nb_tail_beyond(mu, s, bin_width, n_max):
        out = np.empty(mu.size)
        for i in range(mu.size):
            total = 0.0
            for sign in (1.0, -1.0):
                m = sign * mu[i]
                z0 = (n_max * bin_width - m) / s
                z1 = ((n_max + 1) * bin_width - m) / s
                s0 = _nb_small(z0)
                s1 = _nb_small(z1)
                ramp = (s / bin_width) * (-z0 * _nb_mass(z0, z1, s0, s1) + _nb_pdf(z0) - _nb_pdf(z1))
                beyond = 0.5 * s1 if z1 >= 0.0 else 1.0 - 0.5 * s1
                total += ramp + beyond
            out[i] = total if total > 0.0 else 0.0
        return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def segment_integral(mu, s, a, b, c0, c1):
    """``int_a^b (c0 + c1*t) N(t; mu, s**2) dt`` elementwise; infinite limits allowed."""
    if not HAVE_NUMBA:
        return np_segment_integral(mu, s, a, b, c0, c1)
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, s, a, b, c0, c1)))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(x).ravel() for x in arrs]
    return _nb_segment_integral(*flat).reshape(shape)


def tent_mass_grid(mu, s, bin_width, n):
    if not HAVE_NUMBA:
        return np_tent_mass_grid(mu, s, bin_width, n)
    mu = np.ascontiguousarray(np.asarray(mu, dtype=float).reshape(-1))
    n = np.ascontiguousarray(np.asarray(n, dtype=np.int64).reshape(-1))
    return _nb_tent_mass_grid(mu, float(s), float(bin_width), n)


def folded_tent_mass_grid(mu, s, bin_width, n_max):
    if not HAVE_NUMBA:
        return np_folded_tent_mass_grid(mu, s, bin_width, n_max)
    mu = np.ascontiguousarray(np.asarray(mu, dtype=float).reshape(-1))
    return _nb_folded_tent_mass_grid(mu, float(s), float(bin_width), int(n_max))


def tail_beyond(mu, s, bin_width, n_max):
    if not HAVE_NUMBA:
        return np_tail_beyond(mu, s, bin_width, n_max)
    mu = np.ascontiguousarray(np.asarray(mu, dtype=float).reshape(-1))
    return _nb_tail_beyond(mu, float(s), float(bin_width), int(n_max))
