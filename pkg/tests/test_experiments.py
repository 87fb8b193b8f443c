import math

import pytest

from probxform import experiments as X
from probxform.errors import ValidationError


@pytest.fixture(scope="module")
def oracle():
    return X.kalman_posterior_oracle((0.0, 1.0))


def test_kalman_rejects_small_n():
    with pytest.raises(ValidationError):
        X.experiment_kalman(n=0)


def test_kalman_is_deterministic():
    a, b = X.experiment_kalman(seed=3, n=2000), X.experiment_kalman(seed=3, n=2000)
    assert a == b
    assert a.to_json().keys() >= {"means", "std_errors", "ess_per_sample", "accept_rate"}


def test_oracle_is_inside_prior_support(oracle):
    assert 3 < oracle["noiseT"] < 8 and 1 < oracle["noiseE"] < 4
    assert oracle["sd_noiseT"] > 0 and oracle["sd_noiseE"] > 0


def test_kalman_agrees_with_oracle(oracle):
    rep = X.experiment_kalman(seed=7, n=10000)
    for name in ("noiseT", "noiseE"):
        assert abs(rep.means[name] - oracle[name]) < 4 * rep.std_errors[name]
    assert 0 < rep.accept_rate < 1


def test_ess_comparison_favours_collapsed():
    r = X.ess_comparison(seed=0, n=3000)
    assert set(r["collapsed"]) == set(r["uncollapsed"]) == {"noiseT", "noiseE"}
    assert r["collapsed"]["noiseT"] > r["uncollapsed"]["noiseT"]


def test_throughput_positive():
    assert X.throughput(X.kalman_kernel(), (5.5, 2.5), seconds=0.1) > 0


def test_gmm_recovers_labels():
    rep = X.experiment_gmm(seed=0, n_points=30, sweeps=5)
    assert len(rep.accuracy) == 5 and rep.accuracy[-1] > 0.9
    assert sorted(round(m) for m in rep.final_means) == pytest.approx([-5, 5], abs=1)


def test_gmm_is_deterministic():
    a, b = X.experiment_gmm(seed=0), X.experiment_gmm(seed=0)
    assert a.to_json() == b.to_json()


def test_gmm_identical_components_near_chance():
    rep = X.experiment_gmm(seed=1, n_points=12, sweeps=3, means=(0.0, 0.0))
    assert rep.accuracy[-1] < 0.9


@pytest.mark.parametrize("kw", [{"n_points": 1}, {"n_points": 41}, {"sweeps": 0}])
def test_gmm_validation(kw):
    with pytest.raises(ValidationError):
        X.experiment_gmm(**kw)


def test_gmm_data_rounded():
    labels, ys = X.gmm_data(0, 10)
    assert len(labels) == len(ys) == 10
    assert all(math.isclose(y, round(y, 1)) for y in ys)
