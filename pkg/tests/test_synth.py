import numpy as np
import pytest

from syncgain.errors import InfeasibleAtInitialization
from syncgain.graph import WeightedDigraph, laplacian, nonzero_spectrum, preset
from syncgain.linalg import Plant, matrix_2norm, real_embedding, spectral_abscissa
from syncgain.synth import (
    METHODS,
    AlgorithmConfig,
    Probe,
    aek_design,
    algorithm1,
    bisect_mu,
    design,
    direct_design,
    listmann_corners,
    listmann_design,
    riccati_design,
)
from syncgain.verify import check_mu_uges, estimate_rate

FAST = AlgorithmConfig(alpha_grid=(0.1, 1.0, 10.0))


def spectrum(name):
    return nonzero_spectrum(laplacian(preset(name)))


# --- bisection -----------------------------------------------------------------

def test_bisect_threshold():
    calls = []

    def pred(mu):
        calls.append(mu)
        return mu <= 0.7

    res = bisect_mu(pred, cap=10.0, tol=1e-4)
    assert res.feasible and 0.7 - 1e-4 <= res.mu <= 0.7
    assert res.upper - res.mu <= 1e-4
    assert res.evaluations == len(calls)


def test_bisect_always_true_returns_cap():
    res = bisect_mu(lambda mu: True, cap=3.5, tol=1e-4)
    assert res.feasible and res.mu == 3.5


def test_bisect_infeasible_at_zero():
    res = bisect_mu(lambda mu: False, cap=3.5)
    assert not res.feasible and np.isnan(res.mu)


def test_bisect_with_scores_matches_plain():
    # scores only steer the probe points; the bracket is the same
    target = 2.345
    plain = bisect_mu(lambda mu: mu <= target, cap=100.0, tol=1e-6)
    scored = bisect_mu(lambda mu: Probe(mu <= target, mu - target, mu), cap=100.0, tol=1e-6)
    assert abs(plain.mu - scored.mu) <= 2e-6
    assert scored.mu <= target and scored.witness == scored.mu
    assert scored.upper - scored.mu <= 1e-6


def test_bisect_lyapunov_predicate_finds_decay_rate():
    from syncgain.lmi import assemble_lyap_check, check_feasible
    aek = np.kron(np.eye(2), np.array([[-1.0, 2.0], [0.0, -3.0]]))
    res = bisect_mu(lambda mu: check_feasible(assemble_lyap_check(aek, mu)).feasible, cap=10.0, tol=1e-4)
    # rho = 1; the margin costs a little below it
    assert res.feasible and 1.0 - 1e-2 < res.mu <= 1.0


# --- Riccati baseline ----------------------------------------------------------

def test_riccati_scalar_meets_norm_bound():
    p = Plant([[0.0]], [[1.0]])
    res = riccati_design(p, [2.0], AlgorithmConfig(kbar=5.0))
    assert res.gain_norm == pytest.approx(5.0, rel=1e-5)
    # closed loop -lambda K = -10
    assert res.mu_star == pytest.approx(10.0, rel=1e-5)


def test_riccati_norm_monotone_in_kbar(x29):
    lams = spectrum("circ4")
    norms = [riccati_design(x29, lams, AlgorithmConfig(kbar=k)).gain_norm for k in (5.0, 10.0, 20.0)]
    assert norms == sorted(norms)
    assert norms[-1] == pytest.approx(20.0, rel=1e-3)


# --- common-Q baselines --------------------------------------------------------

def test_listmann_corners_examples():
    assert listmann_corners([1 + 1j]) == [1, 1 + 1j]
    assert listmann_corners([1, 10]) == [1, 10]
    assert listmann_corners([1 + 1j, 2]) == [1, 1 + 1j, 2, 2 + 1j]


def test_listmann_equals_aek_for_real_star(osc):
    lams = spectrum("star10")
    a = listmann_design(osc, lams, FAST)
    b = aek_design(osc, lams, FAST)
    assert a.info["values"] == b.info["values"]
    assert a.mu_star == b.mu_star


def test_common_q_certificate_and_norm(osc):
    lams = spectrum("circ4")
    res = aek_design(osc, lams, FAST)
    assert res.gain_norm <= 20.0 * (1 + 1e-6)
    Qe = res.certificates[0]
    assert np.linalg.eigvalsh(Qe).min() > 0
    for lam in lams:
        aek = real_embedding(osc, res.gain, lam)
        M = aek @ Qe + Qe @ aek.T + 2 * res.mu_star * Qe
        assert np.linalg.eigvalsh(M).max() < 0
    assert estimate_rate(osc, lams, res.gain).mu_hat >= res.mu_star


# --- synthesis -------------------------------------------------------------------

def test_stable_plant_direct_design():
    p = Plant(-np.eye(2), np.eye(2))
    res = direct_design(p, [1.0], FAST)
    assert res.mu_star > 1.0
    assert check_mu_uges(p, [1.0], res.gain, res.mu_star)


def test_stable_plant_algorithm1_converges():
    p = Plant(-2 * np.eye(2), np.eye(2))
    res = algorithm1(p, preset("circ4"), AlgorithmConfig())
    assert res.iterations <= 5 and res.info["converged"]
    # |K| <= 20 and lambda_min Re = 1 cap the rate at 2 + 20
    assert 20.0 < res.mu_star <= 22.0 + 1e-6
    assert res.gain_norm <= 20.0 * (1 + 1e-6)


def test_initialization_fails_for_huge_alpha(osc):
    with pytest.raises(InfeasibleAtInitialization):
        direct_design(osc, spectrum("circ4"), AlgorithmConfig(alpha_grid=(1e9,)))


def test_algorithm1_osc_circ4_certificates():
    p = Plant([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]])
    lams = spectrum("circ4")
    res = algorithm1(p, preset("circ4"), FAST)
    mus = [mu for kind, mu in res.mu_trace if kind == "synthesis"]
    assert all(b >= a - 1e-4 for a, b in zip(mus, mus[1:]))
    assert res.gain_norm <= 20.0 * (1 + 1e-6)
    assert len(res.certificates) == lams.nu
    for lam, Qe in zip(lams, res.certificates):
        assert np.linalg.eigvalsh(Qe).min() > 0
        aek = real_embedding(p, res.gain, lam)
        assert spectral_abscissa(aek) < -res.mu_star
    assert check_mu_uges(p, lams, res.gain, 0.99 * res.mu_star, method="lyapunov")


def test_algorithm1_rejects_disconnected(osc):
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    with pytest.raises(ValueError):
        algorithm1(osc, WeightedDigraph(w), FAST)


def test_design_dispatch(osc):
    assert METHODS == ("riccati", "listmann", "aek", "direct", "alg1")
    with pytest.raises(ValueError):
        design("hinf", osc, preset("circ4"))
    res = design("riccati", osc, preset("circ4"))
    assert res.method == "riccati"


def test_config_validation():
    with pytest.raises(ValueError):
        AlgorithmConfig(kbar=0)
    with pytest.raises(ValueError):
        AlgorithmConfig(alpha_grid=())
    with pytest.raises(ValueError):
        AlgorithmConfig(tolerance=1e-5, mu_tol=1e-4)
    cfg = AlgorithmConfig(kbar=2.0)
    p = Plant([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    # cap = kbar(|A| + max|lambda| |B|) + |A|
    assert cfg.cap_for(p, [3.0]) == pytest.approx(2.0 * (1 + 3) + 1)
    assert matrix_2norm(p.A) == pytest.approx(1.0)
