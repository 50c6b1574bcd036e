import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from homfisher import (BoundaryError, ConfigError, FisherMatrix, FlatFunctionWarning, ParameterError,
                       PhysicalParams, cfi_delta, closed_form_fim_bucket, closed_form_fim_nr, fim_analysis,
                       fim_numeric, measurement_for, optimal_delta, qfi, qfi_two_photon, relative_information)
from homfisher.information import (ParameterSet, cfi_bucket_notr, cfi_delta_grid, cfi_nr_notr,
                                   golden_section_max, step_size)
from homfisher.model import PARAMETER_NAMES
from homfisher import verify as V

BASE = PhysicalParams(0.0, 0.9, 1.0, 0.4)
HOM_LABELS = ("HOM", "NR-HOM", "TR-HOM", "NRTR-HOM")

interior = st.builds(PhysicalParams, delta=st.floats(0.05, 2.5), alpha=st.floats(0.05, 0.95),
                     sigma=st.floats(0.5, 3.0), gamma=st.floats(0.05, 0.95))


def test_quantum_bounds():
    assert qfi(1.0) == 4.0
    assert qfi(2.5) == 25.0
    assert qfi_two_photon(1.0, 0.4) == 1.44
    assert qfi_two_photon(1.0, 0.0) == qfi(1.0)
    assert relative_information(1.44, 1.0, 0.4) == 1.0
    with pytest.raises(ParameterError):
        relative_information(1.0, 1.0, 1.0)


def test_parameter_set_validation():
    assert ParameterSet("delta, gamma") == ("delta", "gamma")
    for bad in ((), ("beta",), ("delta", "delta")):
        with pytest.raises(ConfigError):
            ParameterSet(bad)


def test_fisher_matrix_container():
    F = FisherMatrix(("delta", "alpha"), [[2.0, 1.0], [1.0, 3.0]], n_repetitions=10)
    assert F["delta"] == 2.0 and F["alpha", "delta"] == 1.0
    a = fim_analysis(F)
    assert a.rank == 2 and a.determinant == pytest.approx(5.0)
    assert a.crb["delta"] == pytest.approx(0.6 / 10)
    assert F.submatrix(["alpha"]).matrix.tolist() == [[3.0]]
    with pytest.raises(ConfigError):
        FisherMatrix(("delta",), np.eye(2))
    assert fim_analysis(FisherMatrix(("delta", "alpha"), [[1.0, 1.0], [1.0, 1.0]])).crb is None


@given(interior)
def test_numeric_matches_closed_forms(p):
    for label, closed in (("HOM", closed_form_fim_bucket), ("NR-HOM", closed_form_fim_nr)):
        Fc = closed(p).matrix
        Fn = fim_numeric(measurement_for(label), p, PARAMETER_NAMES).matrix
        floor = 1e-3 * np.max(np.abs(Fc))
        assert np.all(np.abs(Fn - Fc) <= 1e-5 * np.maximum(np.abs(Fc), floor))


@given(interior)
def test_scalar_closed_forms_match_matrix(p):
    assert cfi_bucket_notr(p) == pytest.approx(closed_form_fim_bucket(p)["delta"], rel=1e-12)
    assert cfi_nr_notr(p) == pytest.approx(closed_form_fim_nr(p)["delta"], rel=1e-12)


def test_closed_forms_match_brute_force_oracle():
    p = PhysicalParams(0.4, 0.8, 1.3, 0.3)
    for label, closed in (("HOM", closed_form_fim_bucket), ("NR-HOM", closed_form_fim_nr)):
        Fo = V.fim_brute_force(measurement_for(label), p, PARAMETER_NAMES).matrix
        Fc = closed(p).matrix
        assert np.allclose(Fo, Fc, rtol=1e-6, atol=1e-8 * np.max(np.abs(Fc)))


@given(interior)
def test_loss_information_decouples_in_number_resolving_matrix(p):
    F = closed_form_fim_nr(p)
    for other in ("delta", "alpha", "sigma"):
        assert abs(F["gamma", other]) < 1e-8
        assert abs(fim_numeric(measurement_for("NR-HOM"), p, PARAMETER_NAMES)["gamma", other]) < 1e-8
    assert F["gamma"] == pytest.approx(2.0 / (p.gamma * (1 - p.gamma)), rel=1e-12)


def test_untimed_matrices_have_rank_two():
    p = PhysicalParams(0.3, 0.8, 1.0, 0.3)
    for closed in (closed_form_fim_bucket, closed_form_fim_nr):
        a = fim_analysis(closed(p))
        assert a.rank == 2 and a.crb is None
    sub = closed_form_fim_bucket(p).submatrix(("delta", "alpha"))
    assert fim_analysis(sub).rank == 1
    assert abs(fim_analysis(sub).determinant) < 1e-12 * np.max(sub.matrix) ** 2


def test_timed_delay_visibility_pair_is_invertible():
    p = PhysicalParams(0.2, 0.9, 1.0, 0.4)
    for label in ("TR-HOM", "NRTR-HOM"):
        a = fim_analysis(fim_numeric(measurement_for(label, 1.0), p, ("delta", "alpha")))
        assert a.rank == 2 and a.determinant > 0


@given(interior, st.sampled_from(HOM_LABELS + ("no-HOM",)), st.floats(0.2, 4))
def test_delay_information_is_even(p, label, T):
    m = measurement_for(label, T)
    assert cfi_delta(m, p) == pytest.approx(cfi_delta(m, p.replace(delta=-p.delta)), rel=1e-7)


@given(interior, st.floats(0.2, 4))
def test_bound_chain_and_protocol_ordering(p, T):
    f = {label: cfi_delta(measurement_for(label, T), p) for label in HOM_LABELS}
    slack = 1e-7 * max(f.values())
    assert f["HOM"] <= f["NR-HOM"] + slack
    assert f["HOM"] <= f["TR-HOM"] + slack
    assert f["NR-HOM"] <= f["NRTR-HOM"] + slack
    assert f["TR-HOM"] <= f["NRTR-HOM"] + slack
    assert f["NRTR-HOM"] <= qfi_two_photon(p.sigma, p.gamma) * (1 + 1e-7)


@pytest.mark.parametrize("label,T", [("HOM", None), ("NR-HOM", None), ("TR-HOM", 0.7), ("NRTR-HOM", 0.7),
                                     ("no-HOM", 0.7)])
def test_information_scales_with_bandwidth(label, T):
    p = PhysicalParams(0.35, 0.85, 1.0, 0.25)
    k = 3.7
    a = cfi_delta(measurement_for(label, T), p)
    b = cfi_delta(measurement_for(label, None if T is None else T / k), p.rescaled(k))
    assert b == pytest.approx(k * k * a, rel=1e-7)


@pytest.mark.parametrize("label,T,delta,F", [
    ("HOM", None, 0.339207417, 0.6330482968),
    ("NR-HOM", None, 0.35950785, 0.6955436700),
    ("TR-HOM", 1.0, 0.3210452, 0.7150989568),
    ("NRTR-HOM", 1.0, 0.4843333, 0.9509048915),
])
def test_optimal_delays_match_frozen_oracle(label, T, delta, F):
    d, f = optimal_delta(measurement_for(label, T), BASE)
    assert d == pytest.approx(delta, abs=2e-6)
    assert f == pytest.approx(F, rel=1e-7)


def test_nohom_information_values_and_period():
    m = measurement_for("no-HOM", 1.0)
    assert cfi_delta(m, BASE) == pytest.approx(0.86650636717, rel=1e-8)
    assert cfi_delta(m, BASE.replace(delta=0.5)) == pytest.approx(0.86456063490, rel=1e-8)
    for d in (0.13, 0.5, 0.77):
        assert cfi_delta(m, BASE.replace(delta=d)) == pytest.approx(cfi_delta(m, BASE.replace(delta=d + 2.0)),
                                                                    rel=1e-8)
    d, _ = optimal_delta(m, BASE)
    assert abs(d) < 1e-4


def test_timed_hom_is_half_of_nohom_far_from_dip():
    for d in (4.0, 6.0):
        p = BASE.replace(delta=d)
        ratio = cfi_delta(measurement_for("TR-HOM", 1.0), p) / cfi_delta(measurement_for("no-HOM", 1.0), p)
        assert ratio == pytest.approx(0.5, rel=0.02)


def test_identical_photons_number_resolving_reaches_two_photon_bound():
    p = PhysicalParams(0.0, 1.0, 1.0, 0.4)
    assert cfi_delta(measurement_for("NR-HOM"), p) == pytest.approx(1.44, rel=1e-6)
    d, f = optimal_delta(measurement_for("NRTR-HOM", 1.0), p)
    # coincidence masses of order delta^2 cancel against O(1) terms, leaving ~1e-7 relative noise
    assert abs(d) < 1e-2 and f <= 1.44 * (1 + 1e-6)


def test_grid_matches_pointwise_evaluation():
    m = measurement_for("NRTR-HOM", 0.8)
    deltas = np.array([-1.1, -0.2, 0.0, 0.3, 2.0])
    grid = cfi_delta_grid(m, BASE, deltas)
    point = [cfi_delta(m, BASE.replace(delta=d)) for d in deltas]
    assert np.allclose(grid, point, rtol=1e-6)


def test_boundary_errors():
    with pytest.raises(BoundaryError):
        closed_form_fim_bucket(PhysicalParams(0.0, 1.0, 1.0, 0.3))
    with pytest.raises(BoundaryError):
        closed_form_fim_nr(PhysicalParams(0.2, 0.9, 1.0, 0.0))
    with pytest.raises(BoundaryError):
        closed_form_fim_bucket(PhysicalParams(0.2, 0.9, 1.0, 1.0))
    with pytest.raises(BoundaryError):
        fim_numeric(measurement_for("NR-HOM"), PhysicalParams(0.2, 1.0, 1.0, 0.3), ("alpha",))
    with pytest.raises(BoundaryError):
        step_size("gamma", PhysicalParams(0.2, 0.9, 1.0, 0.0))


def test_flat_information_warns():
    with pytest.warns(FlatFunctionWarning):
        optimal_delta(measurement_for("HOM"), BASE.replace(gamma=1 - 1e-7))
    with pytest.warns(FlatFunctionWarning):
        _, f = optimal_delta(measurement_for("no-HOM", 1.0), BASE.replace(gamma=1.0))
    assert f == 0.0


def test_no_warning_in_regular_case():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        optimal_delta(measurement_for("TR-HOM", 1.0), BASE)


def test_fim_numeric_accepts_plain_callables():
    # a two-outcome Bernoulli model with success probability 0.5 + 0.2*delta
    def model(p):
        q = 0.5 + 0.2 * p.delta
        return np.array([q, 1 - q])

    F = fim_numeric(model, PhysicalParams(0.1, 0.9), ("delta",))
    assert F["delta"] == pytest.approx(0.04 / (0.52 * 0.48), rel=1e-9)


def test_golden_section_finds_interior_max():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, -1.0, 2.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8) and fx == pytest.approx(0.0, abs=1e-15)
    assert math.isfinite(fx)
