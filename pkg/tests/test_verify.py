import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from syncgain.graph import laplacian, nonzero_spectrum, preset
from syncgain.linalg import Plant
from syncgain.verify import check_mu_uges, estimate_rate


def test_rate_stable_identity():
    p = Plant(-np.eye(2), np.eye(2))
    est = estimate_rate(p, [1.0], np.zeros((2, 2)))
    assert est.mu_hat == pytest.approx(1.0) and est.worst_k == 0


def test_rate_zero_gain_oscillator(osc):
    lams = nonzero_spectrum(laplacian(preset("circ4")))
    assert estimate_rate(osc, lams, np.zeros((1, 2))).mu_hat == pytest.approx(0.0, abs=1e-12)


def test_rate_scalar_worst_mode():
    # A = 0, B = 1, K = 2: modes -2 lambda, slowest at lambda = 1
    est = estimate_rate(Plant([[0.0]], [[1.0]]), [1.0, 3.0], [[2.0]])
    assert est.mu_hat == pytest.approx(2.0)
    assert est.worst_k == 0
    assert est.abscissas == pytest.approx((-2.0, -6.0))


def test_rate_rejects_empty_spectrum(osc):
    with pytest.raises(ValueError):
        estimate_rate(osc, [], np.zeros((1, 2)))


def test_check_examples():
    p = Plant([[0.0]], [[1.0]])
    assert check_mu_uges(p, [1.0], [[2.0]], 1.9)
    assert not check_mu_uges(p, [1.0], [[2.0]], 2.1)
    assert check_mu_uges(p, [1.0], [[2.0]], 1.9, method="lyapunov")
    assert not check_mu_uges(p, [1.0], [[2.0]], 2.1, method="lyapunov")
    with pytest.raises(ValueError):
        check_mu_uges(p, [1.0], [[2.0]], -1.0)
    with pytest.raises(ValueError):
        check_mu_uges(p, [1.0], [[2.0]], 1.0, method="nyquist")


@given(st.integers(0, 2**31 - 1))
def test_spectral_and_lyapunov_checks_agree_away_from_boundary(seed):
    r = np.random.default_rng(seed)
    p = Plant(r.standard_normal((2, 2)), r.standard_normal((2, 1)), check_controllable=False)
    K = r.standard_normal((1, 2))
    lams = [complex(r.uniform(0.2, 2), r.uniform(0, 1)), float(r.uniform(0.2, 2))]
    mu_hat = estimate_rate(p, lams, K).mu_hat
    mu = float(r.uniform(0, 2))
    if mu_hat <= 0 or abs(mu - mu_hat) < 0.05 * max(1.0, abs(mu_hat)):
        return
    spectral = check_mu_uges(p, lams, K, mu)
    assert spectral == (mu < mu_hat)
    assert check_mu_uges(p, lams, K, mu, method="lyapunov") == spectral
