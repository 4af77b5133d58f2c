from math import gcd

import numpy as np
import pytest

from rtfa.oracles import (
    Envelope, Jitter, Noise, lemma_bounds, make_instance, noise_lambda, noise_probability, recovery_trial,
    theorem_conditions, truncated_correlation, truncated_correlation_maxima,
)
from rtfa.ramanujan import get_dictionary


def ramanujan_by_cosines(q, n):
    ks = [k for k in range(1, q + 1) if gcd(k, q) == 1]
    return np.rint(sum(np.cos(2 * np.pi * k * np.asarray(n) / q) for k in ks))


def totient(q):
    return sum(1 for k in range(1, q + 1) if gcd(k, q) == 1)


def brute_truncated(p, q, start):
    """Enumerate every shift pair and partial length directly."""
    L = p * q // gcd(p, q)
    best = 0.0
    for s in range(totient(p)):
        for t in range(totient(q)):
            n = np.arange(start, start + L - 1)
            terms = ramanujan_by_cosines(p, n - s) * ramanujan_by_cosines(q, n - t)
            partial = np.cumsum(terms)  # lengths 1..L-1
            best = max(best, float(np.abs(partial).max(initial=0.0)))
    return best


@pytest.mark.parametrize("p,q", [(1, 1), (2, 3), (3, 2), (4, 6), (5, 7), (6, 6), (9, 12)])
@pytest.mark.parametrize("convention,start", [("terms", 0), ("shifted", 1)])
def test_truncated_correlation_matches_enumeration(p, q, convention, start):
    assert truncated_correlation(p, q, convention) == brute_truncated(p, q, start)


def test_truncated_correlation_examples():
    # fewer than one common period of the constant sequence is an empty sum
    assert truncated_correlation(1, 1) == 0.0 == truncated_correlation(1, 1, "shifted")
    assert truncated_correlation(2, 3) == 4.0
    assert truncated_correlation(2, 3, "shifted") == 3.0


def test_maxima_for_two_three():
    d = get_dictionary(300, 5, "unit")
    pairs_in = [(2, 2), (2, 3), (3, 3)]
    pairs_out = [(p, q) for p in (2, 3) for q in (1, 4, 5)]
    m_ss = max(brute_truncated(p, q, 0) for p, q in pairs_in)
    m_ssc = max(brute_truncated(p, q, 0) for p, q in pairs_out)
    assert truncated_correlation_maxima(d, [2, 3]) == (m_ss, m_ssc)


def test_doubled_penalty_divides_maxima_by_four():
    d = get_dictionary(120, 6, "unit")
    a = truncated_correlation_maxima(d, [2, 3])
    doubled = type("Doubled", (), {"p_max": 6, "zeta": staticmethod(lambda p: 2.0 * d.zeta(p))})()
    b = truncated_correlation_maxima(doubled, [2, 3])
    assert np.allclose(b, np.array(a) / 4)


def test_single_period_eigenvalue_bound():
    inst = make_instance(30, 6, [3], "unit", seed=0)
    assert inst.k_bound > 0
    assert inst.eig_min_gram >= inst.k_bound
    assert inst.gram_inv_inf <= 1 / inst.k_bound * (1 + 1e-12)


def test_lemma_bounds_hold_and_degenerate_case():
    rep = lemma_bounds(make_instance(150, 6, [3, 5], "unit", seed=1))
    assert rep["valid"] and rep["eig_bound_holds"] and rep["cross_bound_holds"] and rep["gram_inv_bound_holds"]
    bad = lemma_bounds(make_instance(15, 6, [3, 5], "unit", seed=1))
    assert bad["K"] <= 0 and bad["valid"] is False


def test_k_bound_from_definition():
    inst = make_instance(90, 6, [2, 3], "unit", seed=2)
    M = max(inst.m_ss, inst.m_ssc)
    # smallest eigenvalues of C_2^T C_2 and C_3^T C_3 are 2 and 3
    expected = min(45 * 2, 30 * 3) - inst.n_s * M
    assert np.isclose(inst.k_bound, expected)
    assert inst.n_s == 3


def test_envelope_identity_and_margin():
    n = 3000
    inst = make_instance(n, 6, [3, 5], "unit", seed=3)
    assert inst.well_posed
    ident = theorem_conditions(inst, Envelope(e=np.ones(n)), 5.0)
    assert ident.holds and ident.details["max_dev"] == 0.0

    rep = theorem_conditions(inst, Envelope(max_dev=0.01), 5.0)
    B = inst.dict.b_matrix
    S = inst.support
    Sc = np.setdiff1d(np.arange(B.shape[1]), S)
    BS = B[:, S]
    proj = BS @ np.linalg.solve(BS.T @ BS, BS.T)
    resid = B[:, Sc].T @ (np.eye(n) - proj)
    m1 = np.abs(resid).sum(axis=1).max() * np.abs(B @ inst.x_star).max()
    slack = 1 - inst.n_s**2 * inst.m_ssc / inst.k_bound
    assert np.isclose(rep.margin, 5.0 / m1 * slack - 0.01, rtol=1e-8)
    assert rep.holds == (rep.margin > 0)


def test_noise_probability_and_lambda():
    inst = make_instance(300, 5, [2, 3], "unit", seed=0)
    assert noise_probability(inst, 0.0, 1.0) == 1.0
    lam = noise_lambda(inst, 0.5, 0.9)
    assert np.isclose(noise_probability(inst, 0.5, lam), 0.9)
    assert noise_probability(inst, 0.5, 2 * lam) > 0.9
    rep = theorem_conditions(inst, Noise(0.5), lam)
    assert rep.holds and np.isclose(rep.details["probability"], 0.9)


def test_jitter_threshold_formula():
    inst = make_instance(300, 5, [2, 3], "unit", seed=0)
    rep = theorem_conditions(inst, Jitter(), 1.0)
    m1 = sum(inst.resid_op_inf * np.abs(c).max() for c in inst.components)
    K = inst.k_bound
    assert np.isclose(rep.details["lambda_min"], 2 * K * m1 / (K - inst.n_s**2 * inst.m_ssc))
    assert not theorem_conditions(inst, Jitter(), 0.5 * rep.details["lambda_min"]).holds
    assert theorem_conditions(inst, Jitter(), 2 * rep.details["lambda_min"]).holds


def test_noise_trials_meet_guarantee():
    inst = make_instance(300, 5, [2, 3], "unit", seed=0)
    lam = noise_lambda(inst, 0.5, 0.9)
    rep = recovery_trial(inst, Noise(0.5), lam, trials=20, seed=1)
    assert rep.solver_failures == 0
    assert rep.containment_rate >= rep.guarantee
    again = recovery_trial(inst, Noise(0.5), lam, trials=20, seed=1)
    assert (again.contained, again.detected) == (rep.contained, rep.detected)


def test_envelope_trials_contained_when_hypothesis_holds():
    inst = make_instance(3000, 6, [3, 5], "unit", seed=3)
    lam = 5.0
    dev = 0.5 * theorem_conditions(inst, Envelope(max_dev=0.0), lam).details["dev_bound"]
    rep = recovery_trial(inst, Envelope(max_dev=dev), lam, trials=10, seed=2)
    assert rep.hypothesis_held == 10 and rep.contained == 10


def test_validation():
    inst = make_instance(60, 5, [2], "unit", seed=0)
    with pytest.raises(ValueError):
        make_instance(60, 5, [7])
    with pytest.raises(ValueError):
        recovery_trial(inst, Noise(0.1), 1.0, trials=0)
    with pytest.raises(TypeError):
        theorem_conditions(inst, "noise", 1.0)
    with pytest.raises(ValueError):
        Envelope(max_dev=1.5)
