import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from homfisher import kernels


def tent_quad(mu, s, T, n):
    f = lambda t: max(0.0, 1.0 - abs(t - n * T) / T) * norm.pdf(t, mu, s)  # noqa: E731
    return quad(f, (n - 1) * T, n * T, epsabs=1e-15, epsrel=1e-13)[0] + \
        quad(f, n * T, (n + 1) * T, epsabs=1e-15, epsrel=1e-13)[0]


@pytest.mark.parametrize("mu,s,T", [(0.3, 0.5, 1.0), (-2.0, 0.1, 0.4), (5.0, 1.3, 0.25), (0.0, 0.5, 5.0)])
def test_tent_mass_matches_scipy_quad(mu, s, T):
    n = np.arange(-12, 13)
    got = kernels.tent_mass_grid([mu], s, T, n)[0]
    want = np.array([tent_quad(mu, s, T, k) for k in n])
    assert np.allclose(got, want, rtol=1e-10, atol=1e-15)


@given(mu=st.floats(-6, 6), s=st.floats(0.05, 3), T=st.floats(0.05, 6))
def test_masses_and_tail_sum_to_one(mu, s, T):
    n_max = int(np.ceil((abs(mu) + 9 * s) / T)) + 1
    signed = kernels.tent_mass_grid([mu], s, T, np.arange(-n_max, n_max + 1))[0]
    folded = kernels.folded_tent_mass_grid([mu], s, T, n_max)[0]
    assert signed.sum() == pytest.approx(1.0, abs=1e-13)
    assert folded.sum() == pytest.approx(1.0, abs=1e-13)
    short = n_max // 2
    tail = kernels.tail_beyond([mu], s, T, short)[0]
    assert folded[:short + 1].sum() + tail == pytest.approx(1.0, abs=1e-13)


@given(mu=st.floats(-8, 8), s=st.floats(0.05, 3), T=st.floats(0.05, 6))
def test_backends_agree(mu, s, T):
    n = np.arange(-10, 11)
    assert np.allclose(kernels.np_tent_mass_grid([mu], s, T, n), kernels.tent_mass_grid([mu], s, T, n),
                       rtol=1e-13, atol=1e-16)
    assert np.allclose(kernels.np_folded_tent_mass_grid([mu], s, T, 10),
                       kernels.folded_tent_mass_grid([mu], s, T, 10), rtol=1e-13, atol=1e-16)
    assert np.allclose(kernels.np_tail_beyond([mu], s, T, 3), kernels.tail_beyond([mu], s, T, 3),
                       rtol=1e-13, atol=1e-16)


def test_noncontiguous_indices_agree_with_contiguous():
    n = np.array([-3, 0, 2, 7])
    full = kernels.tent_mass_grid([0.8], 0.6, 0.5, np.arange(-3, 8))[0]
    assert np.allclose(kernels.tent_mass_grid([0.8], 0.6, 0.5, n)[0], full[n + 3], rtol=1e-14, atol=0)


def test_deep_tail_stays_finite_and_nonnegative():
    out = kernels.tent_mass_grid([0.0], 0.01, 1.0, np.arange(0, 400))[0]
    assert np.all(np.isfinite(out)) and np.all(out >= 0.0)
    assert out[5:].max() == 0.0


def test_segment_integral_basic_values():
    assert kernels.segment_integral(0.0, 2.0, -1e3, 1e3, 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert kernels.segment_integral(0.0, 1.0, -1.0, 1.0, 0.0, 1.0) == pytest.approx(0.0, abs=1e-16)
    assert kernels.segment_integral(0.0, 1.0, -np.inf, np.inf, 1.0, 0.0) == 1.0


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("1", "numba")])
def test_environment_flag_selects_backend(flag, expected):
    env = dict(os.environ, HOMFISHER_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from homfisher import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
