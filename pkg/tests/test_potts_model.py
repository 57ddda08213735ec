import itertools
import math

import numpy as np
import pytest
from scipy import stats

from multimodal_smc.potts.geometry import (CENTERS, BarycentricGeometry, center_geometry,
                                           distance, in_inner, in_lambda, mode_and_region,
                                           mode_of_counts, mode_of_ratios)
from multimodal_smc.potts.model import (BETA_C, PottsParams, bridging_builder, glauber_run,
                                        glauber_step, interpolation_stage_pmf, lattice,
                                        lattice_index, log_partition, magnetisation_log_pmf,
                                        magnetisation_transitions, prefix_log_pmf_from_larger,
                                        spin_counts, step_schedule, transition_probabilities)
from multimodal_smc.smc import stream


def all_configs(k):
    return np.array(list(itertools.product(range(3), repeat=k)), dtype=np.int8).reshape(3 ** k, k)


def energy(configs, beta):
    k = configs.shape[1]
    if k == 0:
        return np.zeros(len(configs))
    c = spin_counts(configs)
    return beta * (c.astype(float) ** 2).sum(axis=1) / k


# exact magnetisation law -------------------------------------------------------------

def test_pmf_single_spin_uniform():
    pmf = magnetisation_log_pmf(PottsParams(1))
    np.testing.assert_allclose(pmf.p, np.full(3, 1 / 3), atol=1e-15)


def test_pmf_two_spins_hand_computation():
    b = BETA_C
    pmf = magnetisation_log_pmf(PottsParams(2))
    z = 3 * math.exp(2 * b) + 6 * math.exp(b)
    assert pmf.log_z == pytest.approx(math.log(z), abs=1e-14)
    assert math.exp(pmf.log_prob([2, 0, 0])) == pytest.approx(math.exp(2 * b) / z)
    assert math.exp(pmf.log_prob([1, 1, 0])) == pytest.approx(2 * math.exp(b) / z)


@pytest.mark.parametrize("k", range(0, 7))
def test_partition_function_brute_force(k):
    conf = all_configs(k)
    brute = math.log(np.exp(energy(conf, BETA_C)).sum())
    assert log_partition(k) == pytest.approx(brute, abs=1e-12)


def test_pmf_matches_spin_enumeration():
    M = 6
    conf = all_configs(M)
    p = np.exp(energy(conf, BETA_C))
    p /= p.sum()
    idx = lattice_index(spin_counts(conf), M)
    agg = np.bincount(idx, weights=p)
    np.testing.assert_allclose(magnetisation_log_pmf(PottsParams(M)).p, agg, atol=1e-15)


def test_lattice_indexing():
    M = 7
    c = lattice(M)
    assert len(c) == (M + 1) * (M + 2) // 2
    np.testing.assert_array_equal(lattice_index(c, M), np.arange(len(c)))


def test_pmf_symmetric_in_colours():
    pmf = magnetisation_log_pmf(PottsParams(30))
    c = pmf.counts
    np.testing.assert_allclose(pmf.logp, pmf.log_prob(c[:, [1, 2, 0]]), atol=1e-12)
    np.testing.assert_allclose(pmf.logp, pmf.log_prob(c[:, [1, 0, 2]]), atol=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        PottsParams(0)
    with pytest.raises(ValueError):
        PottsParams(5, -1.0)


# magnetisation chain ----------------------------------------------------------------

@pytest.mark.parametrize("M", [3, 10, 57, 200])
def test_detailed_balance(M):
    pmf = magnetisation_log_pmf(PottsParams(M))
    c = pmf.counts
    P = transition_probabilities(c, BETA_C)
    worst = 0.0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            ok = c[:, i] > 0
            y = c[ok].copy()
            y[:, i] -= 1
            y[:, j] += 1
            Py = transition_probabilities(y, BETA_C)
            lhs = pmf.logp[ok] + np.log(P[ok, i, j])
            rhs = pmf.log_prob(y) + np.log(Py[:, j, i])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst < 1e-9


def test_transitions_sum_to_one():
    params = PottsParams(40)
    for counts in ([40, 0, 0], [13, 14, 13], [0, 1, 39]):
        moves = magnetisation_transitions(counts, params)
        assert sum(p for _, p in moves) == pytest.approx(1.0, abs=1e-14)
        assert all(p >= 0 for _, p in moves)
    with pytest.raises(ValueError):
        magnetisation_transitions([1, 2, 3], params)


# spin-level Glauber, M = 8 ------------------------------------------------------------

def glauber_matrix(M, beta):
    """3^M heat-bath matrix built from energies of neighbouring configurations."""
    conf = all_configs(M)
    code = conf.astype(np.int64) @ (3 ** np.arange(M - 1, -1, -1))
    assert np.array_equal(code, np.arange(len(conf)))
    P = np.zeros((len(conf), len(conf)))
    for site in range(M):
        cand = np.repeat(conf[:, None, :], 3, axis=1)
        cand[:, :, site] = np.arange(3)
        e = np.stack([energy(cand[:, c, :], beta) for c in range(3)], axis=1)
        w = np.exp(e - e.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        for c in range(3):
            tgt = cand[:, c, :].astype(np.int64) @ (3 ** np.arange(M - 1, -1, -1))
            np.add.at(P, (np.arange(len(conf)), tgt), w[:, c] / M)
    return conf, P


def test_glauber_matrix_preserves_gibbs_measure():
    M = 8
    conf, P = glauber_matrix(M, BETA_C)
    pi = np.exp(energy(conf, BETA_C))
    pi /= pi.sum()
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-13)
    np.testing.assert_allclose(pi @ P, pi, atol=1e-15)


def test_glauber_step_matches_heat_bath_row():
    M = 8
    conf, P = glauber_matrix(M, BETA_C)
    start = np.array([0, 0, 1, 2, 0, 1, 0, 2], dtype=np.int8)
    s_code = int(start.astype(np.int64) @ (3 ** np.arange(M - 1, -1, -1)))
    row = P[s_code]
    rng = stream(31)
    n = 40_000
    draws = np.empty(n, np.int64)
    params = PottsParams(M)
    for i in range(n):
        out = glauber_step(start, params, rng)
        draws[i] = int(out.astype(np.int64) @ (3 ** np.arange(M - 1, -1, -1)))
    support = np.flatnonzero(row > 0)
    obs = np.array([(draws == s).sum() for s in support])
    assert obs.sum() == n
    assert stats.chisquare(obs, row[support] * n).pvalue > 1e-3


def test_glauber_run_counts_law():
    M = 12
    params = PottsParams(M)
    spins = np.zeros((4000, M), dtype=np.int8)
    glauber_run(spins, params, 400, stream(32))
    modes = mode_of_counts(spin_counts(spins))
    exact = magnetisation_log_pmf(params).mode_masses()
    obs = np.array([(modes == m).sum() for m in (1, 2, 3, 4)])
    assert stats.chisquare(obs, exact * len(spins)).pvalue > 1e-3


# interpolation sequence ---------------------------------------------------------------

def test_prefix_law_exchangeability_m8():
    M = 8
    conf = all_configs(M)
    p = np.exp(energy(conf, BETA_C))
    p /= p.sum()
    idx = lattice_index(spin_counts(conf[:, :M - 1]), M - 1)
    brute = np.bincount(idx, weights=p, minlength=len(lattice(M - 1)))
    counts, q = prefix_log_pmf_from_larger(magnetisation_log_pmf(PottsParams(M)))
    np.testing.assert_array_equal(counts, lattice(M - 1))
    np.testing.assert_allclose(q, brute, atol=1e-15)


def stage_law(M, k, beta=BETA_C):
    """Spin-level law of mu_k: k-spin Potts prefix times uniform tail."""
    conf = all_configs(M)
    p = np.exp(energy(conf[:, :k], beta)) / 3.0 ** (M - k)
    return conf, p / np.exp(log_partition(k, beta))


def test_interpolation_weights_are_density_ratios():
    M = 5
    b = bridging_builder("interpolation", PottsParams(M))
    for k in range(M):
        conf, pk = stage_law(M, k)
        _, pk1 = stage_law(M, k + 1)
        assert pk.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(b.weight(k, conf), pk1 / pk, rtol=1e-12)


@pytest.mark.parametrize("M", [20, 50])
def test_interpolation_weights_normalised(M):
    b = bridging_builder("interpolation", PottsParams(M))
    for k in range(M):
        counts, lw = b.stage_log_weights(k)
        pk = magnetisation_log_pmf(PottsParams(k)).p if k > 0 else np.ones(1)
        total = float(pk @ np.exp(lw).mean(axis=1))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_interpolation_max_weight_m50():
    b = bridging_builder("interpolation", PottsParams(50))
    assert max(b.max_weight(k) for k in range(50)) <= 16.0


def test_interpolation_stage_pmf_endpoints():
    M = 15
    full = magnetisation_log_pmf(PottsParams(M))
    np.testing.assert_allclose(interpolation_stage_pmf(M, M).p, full.p, atol=1e-15)
    unif = magnetisation_log_pmf(PottsParams(M, 0.0))
    np.testing.assert_allclose(interpolation_stage_pmf(M, 0).p, unif.p, atol=1e-15)


def test_interpolation_stage_pmf_matches_enumeration():
    M, k = 6, 3
    conf, p = stage_law(M, k)
    brute = np.bincount(lattice_index(spin_counts(conf), M), weights=p)
    np.testing.assert_allclose(interpolation_stage_pmf(M, k).p, brute, atol=1e-15)


def test_off_critical_interpolation_is_flagged():
    with pytest.warns(UserWarning):
        b = bridging_builder("interpolation", PottsParams(10, 1.0))
    assert b.flagged


def test_builder_validation():
    with pytest.raises(ValueError):
        bridging_builder("interpolation", PottsParams(10), n_stages=5)
    with pytest.raises(ValueError):
        bridging_builder("annealing", PottsParams(10))


def test_tempering_weights_are_density_ratios():
    M = 4
    b = bridging_builder("tempering", PottsParams(M), n_stages=3)
    conf = all_configs(M)
    for k in range(3):
        pk = np.exp(energy(conf, b.betas[k]) - log_partition(M, b.betas[k]))
        pk1 = np.exp(energy(conf, b.betas[k + 1]) - log_partition(M, b.betas[k + 1]))
        np.testing.assert_allclose(b.weight(k, conf), pk1 / pk, rtol=1e-12)


def test_step_schedule():
    assert step_schedule(0) == 0 and step_schedule(1) == 0
    assert step_schedule(2) == math.ceil(2 * math.log(2) ** 2)
    assert step_schedule(100, 2.0) == math.ceil(200 * math.log(100) ** 2)


def test_mutation_keeps_stage_law_m4():
    # one mutation step of K_k applied to exact mu_k samples leaves the mode masses unchanged
    M, k, N = 4, 3, 60_000
    b = bridging_builder("interpolation", PottsParams(M))
    conf, p = stage_law(M, k)
    rng = stream(33)
    spins = conf[rng.choice(len(conf), size=N, p=p)].copy()
    spins = b.mutate(k, spins, rng)
    idx = (spins.astype(np.int64) @ (3 ** np.arange(M - 1, -1, -1)))
    obs = np.bincount(idx, minlength=len(conf))
    assert stats.chisquare(obs, p * N).pvalue > 1e-3


# geometry ------------------------------------------------------------------------------

def test_geometry_basics():
    assert distance(CENTERS[0], CENTERS[0]) == 0.0
    assert distance([1, 0, 0], [0, 1, 0]) == pytest.approx(1.0)
    e = BarycentricGeometry.basis()
    np.testing.assert_allclose(np.linalg.norm(e, axis=1), math.sqrt(3) / 3)
    assert np.linalg.norm(e[0] - e[1]) == pytest.approx(1.0)
    d, idx, _ = center_geometry(CENTERS[3])
    assert d == 0.0 and idx == 4


def test_mode_rules():
    assert mode_of_counts([3, 1, 1]) == 1
    assert mode_of_counts([2, 2, 0]) == 4  # tie at one half is not a strict majority
    assert mode_of_counts([0, 0, 5]) == 3
    assert mode_of_ratios([0.2, 0.7, 0.1]) == 2
    np.testing.assert_array_equal(mode_of_counts(np.array([[3, 1, 1], [1, 1, 1]])), [1, 4])


def test_mode_and_region():
    assert mode_and_region([5, 3, 2], j0=100) == (1, True)
    M = 600
    centre = np.round(CENTERS[1] * M).astype(int)
    assert mode_and_region(centre, rho=0.01, j0=10) == (2, True)
    off = centre + np.array([0, -30, 30])
    mode, inner = mode_and_region(off, rho=0.01, j0=10)
    assert mode == 2 and not inner


def test_lambda_contains_inner():
    M = 1200
    pts = lattice(M)
    for m in (1, 2, 3, 4):
        inner = in_inner(pts, m, 0.02)
        lam = in_lambda(pts, m, 0.02)
        assert inner.any() and np.all(lam[inner])
