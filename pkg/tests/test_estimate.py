import math
import warnings

import numpy as np
import pytest

from homfisher import (ConfigError, DegenerateDataError, Outcome, PhysicalParams, SearchBoundaryWarning,
                       SingularInformationError, cfi_delta, log_likelihood, measurement_for, mle_delta,
                       mle_joint, sample_generative, sample_outcomes)
from homfisher import binned as B
from homfisher.estimate import estimate
from homfisher.simulate import CountsHistogram, from_mapping

P = PhysicalParams(0.5, 0.9, 1.0, 0.4)
NRTR = measurement_for("NRTR-HOM", 1.0)


def test_log_likelihood_is_minus_infinity_for_impossible_counts():
    h = from_mapping(measurement_for("NR-HOM"), {Outcome(B.TWO_CLICKS_COINCIDENCE): 3, Outcome(B.ONE_CLICK): 2})
    assert log_likelihood(h, PhysicalParams(0.0, 1.0, 1.0, 0.2)) == -math.inf
    assert math.isfinite(log_likelihood(h, PhysicalParams(0.3, 1.0, 1.0, 0.2)))


def test_log_likelihood_value():
    m = measurement_for("NR-HOM")
    h = CountsHistogram(m, [2, 3, 4, 1])
    probs = m.probabilities(P)
    assert log_likelihood(h, P) == pytest.approx(float(np.dot(h.counts, np.log(probs))), rel=1e-14)


def test_log_likelihood_rejects_other_measurement():
    h = sample_outcomes(P, NRTR, 100, 1)
    with pytest.raises(ConfigError):
        log_likelihood(h, P, measurement_for("TR-HOM", 1.0))
    with pytest.raises(ConfigError):
        log_likelihood(h, P, measurement_for("NRTR-HOM", 0.5))


def test_flat_likelihood_is_degenerate():
    h = from_mapping(NRTR, {Outcome(B.ZERO_CLICKS): 50, Outcome(B.ONE_CLICK): 7})
    with pytest.raises(DegenerateDataError):
        mle_delta(h, P)
    with pytest.raises(DegenerateDataError):
        mle_delta(CountsHistogram(measurement_for("HOM"), [0, 0, 0]), P)


def test_all_bunching_data_gives_zero_delay():
    h = from_mapping(NRTR, {Outcome(B.BUNCH_SEP, 0): 400, Outcome(B.BUNCH_SEP, 1): 80, Outcome(B.ONE_CLICK): 30})
    res = mle_delta(h, P.replace(alpha=1.0))
    assert res.estimates["delta"] == 0.0


def test_scaling_counts_keeps_estimate_and_shrinks_bound():
    h = sample_generative(P, NRTR, 20_000, 3)
    a = mle_delta(h, P)
    b = mle_delta(h.scaled(5), P)
    assert b.estimates["delta"] == pytest.approx(a.estimates["delta"], abs=1e-6)
    assert b.crb_variance["delta"] == pytest.approx(a.crb_variance["delta"] / 5, rel=1e-4)
    assert b.log_likelihood == pytest.approx(5 * a.log_likelihood, rel=1e-9)


def test_likelihood_ratio_statistic_is_chi_square_one():
    n, reps = 10_000, 100
    stats, covered = [], 0
    for seed in range(reps):
        h = sample_generative(P, NRTR, n, seed)
        res = mle_delta(h, P)
        lr = 2.0 * (res.log_likelihood - log_likelihood(h, P))
        assert lr >= -1e-8
        stats.append(lr)
        covered += abs(res.estimates["delta"] - P.delta) < 1.96 * math.sqrt(res.crb_variance["delta"])
    assert 0.7 < np.mean(stats) < 1.4
    assert covered >= 88


def test_estimator_tracks_bound():
    n, reps = 20_000, 60
    est = np.array([mle_delta(sample_outcomes(P, NRTR, n, 1000 + s), P).estimates["delta"] for s in range(reps)])
    crb = 1.0 / (n * cfi_delta(NRTR, P))
    assert abs(est.mean() - P.delta) < 4 * math.sqrt(crb / reps)
    assert 0.6 < est.var(ddof=1) / crb < 1.5


@pytest.mark.parametrize("label", ["HOM", "NR-HOM", "TR-HOM", "NRTR-HOM"])
def test_hom_estimates_are_nonnegative(label):
    m = measurement_for(label, 1.0)
    for seed in range(5):
        h = sample_outcomes(P.replace(delta=-0.4), m, 5_000, seed)
        assert mle_delta(h, P).estimates["delta"] >= 0.0


def test_nohom_estimate_keeps_sign():
    truth = P.replace(delta=-0.7)
    m = measurement_for("no-HOM", 0.5)
    res = mle_delta(sample_generative(truth, m, 50_000, 4), truth)
    assert res.estimates["delta"] < 0
    assert abs(res.estimates["delta"] - truth.delta) < 5 * math.sqrt(res.crb_variance["delta"])


def test_loss_only_estimate_variance():
    m = measurement_for("NR-HOM")
    n = 20_000
    est = np.array([estimate(sample_outcomes(P, m, n, s), "gamma", P.replace(gamma=0.3)).estimates["gamma"]
                    for s in range(40)])
    # the loss information is 2 / (gamma (1 - gamma)) per trial
    assert n * est.var(ddof=1) == pytest.approx(0.4 * 0.6 / 2, rel=0.35)
    assert abs(est.mean() - 0.4) < 4 * math.sqrt(0.12 / n / 40)


def test_joint_delay_visibility_fit():
    truth = PhysicalParams(0.2, 0.9, 1.0, 0.4)
    h = sample_outcomes(truth, NRTR, 100_000, 22)
    res = mle_joint(h, ("delta", "alpha"), truth.replace(delta=0.0, alpha=0.5))
    for k in ("delta", "alpha"):
        assert abs(res.estimates[k] - truth.get(k)) < 4 * math.sqrt(res.crb_variance[k])
    assert res.observed_information.params == ("delta", "alpha")
    d = res.as_dict()
    assert set(d["crb_std"]) == {"delta", "alpha"}


def test_untimed_bucket_joint_fit_is_singular():
    truth = PhysicalParams(0.2, 0.9, 1.0, 0.4)
    h = sample_outcomes(truth, measurement_for("HOM"), 100_000, 21)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SingularInformationError) as info:
            mle_joint(h, ("delta", "alpha"), truth)
    assert info.value.analysis.rank == 1


def test_dispatch_and_mapping_knowns():
    h = sample_outcomes(P, NRTR, 5_000, 6)
    a = estimate(h, "delta", P.as_dict())
    b = mle_delta(h, P)
    assert a.estimates == b.estimates
    with pytest.raises(ConfigError):
        estimate(h, "delta", [1, 2])


def test_search_edge_warning():
    h = from_mapping(NRTR, {Outcome(B.COINCIDENCE_SEP, 8): 60, Outcome(B.COINCIDENCE_SEP, 9): 40})
    with pytest.warns(SearchBoundaryWarning):
        mle_delta(h, P)

