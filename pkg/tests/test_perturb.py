import json
import math

import numpy as np
import pytest
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence

import pairmeet.perturb

from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.graphs import complete_graph
from pairmeet.graphs import degree_stats
from pairmeet.graphs import codegree_stats
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.pairspace import PairOperator
from pairmeet.pairspace import materialize
from pairmeet.meeting import SvdResult
from pairmeet.meeting import svd_killed
from pairmeet.perturb import unperturbed_svd
from pairmeet.perturb import gamma11
from pairmeet.perturb import tilde_gamma11_sq
from pairmeet.perturb import tilde_gamma11_sq_upper
from pairmeet.perturb import g12_sq_closed_form
from pairmeet.perturb import perturbation_norm
from pairmeet.perturb import perturbation_norm_bounds
from pairmeet.perturb import stewart_blocks
from pairmeet.perturb import sigma_min_bounds
from pairmeet.perturb import nu_from_eps
from pairmeet.perturb import w_norm_asymptotic
from pairmeet.perturb import norm_estimate_report
from pairmeet.perturb import recover_Q
from pairmeet.perturb import naive_tmeet
from pairmeet.perturb import rank1_proxy
from pairmeet.perturb import perturbation_report
from pairmeet.exception import ConvergenceError
from pairmeet.exception import InconsistencyError
from pairmeet.exception import RecoveryError
from pairmeet.exception import InvalidParameterError

from conftest import complete_chain
from conftest import kn_meeting_time
from conftest import er_chains
from conftest import random_stochastic


def kn_perturbation_norm_sq(n):
    return 1. / (n - 1)**2 + (n - 2)**2 / (n - 1)**3


@pytest.fixture(scope="module")
def k10_blocks():
    P, pi = complete_chain(10)
    usvd = unperturbed_svd(P, pi)
    return P, pi, usvd, stewart_blocks(P, pi, usvd, exact=True), \
        stewart_blocks(P, pi, usvd, exact=False)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gamma11_is_minus_one_over_n(seed):
    n = 3 + seed
    P = random_stochastic(n, seed)
    assert gamma11(P, stationary(P)) == pytest.approx(-1. / n, rel=1e-10)


def test_tilde_gamma11_two_routes():
    P = random_stochastic(5, 12)
    pi = stationary(P)
    usvd = unperturbed_svd(P, pi)
    blocks = stewart_blocks(P, pi, usvd)

    assert blocks.tilde_gamma11_sq == pytest.approx(tilde_gamma11_sq(P),
                                                    rel=1e-12)
    assert blocks.tilde_gamma11_sq == pytest.approx(
        blocks.gamma11**2 + blocks.g21_sq, rel=1e-10)

    # Same g21 through the explicit basis U2.
    y = PairOperator(P, "perturbation").matvec(usvd.v_last)
    g21 = usvd.U2.T @ y
    assert float(g21 @ g21) == pytest.approx(blocks.g21_sq, rel=1e-8,
                                             abs=1e-14)


def test_g12_closed_form():
    P = random_stochastic(4, 5)
    pi = stationary(P)
    blocks = stewart_blocks(P, pi, unperturbed_svd(P, pi))
    assert blocks.g12_sq == pytest.approx(g12_sq_closed_form(pi), rel=1e-9)


@pytest.mark.parametrize("n", [3, 6, 10])
def test_g12_on_complete_graph(n):
    _, pi = complete_chain(n)
    assert n * g12_sq_closed_form(pi) == pytest.approx(1. - 1. / n)


def test_closed_form_last_pair(k3):
    P, pi = k3
    usvd = unperturbed_svd(P, pi)
    np.testing.assert_allclose(usvd.u_last, np.full(9, 1. / 3))
    np.testing.assert_allclose(usvd.v_last, np.full(9, 1. / 3))
    assert usvd.dense
    assert usvd.sigma[-1] == 0.
    assert usvd.U2.shape == (9, 8)


def test_wrong_pi_is_inconsistent(k3):
    P, _ = k3
    with pytest.raises(InconsistencyError):
        unperturbed_svd(P, StationaryDistribution([0.5, 0.3, 0.2]))


def test_partial_unperturbed_matches_dense():
    P = random_stochastic(4, 13)
    pi = stationary(P)
    dense = unperturbed_svd(P, pi, dense=True)
    partial = unperturbed_svd(P, pi, dense=False)
    assert not partial.dense
    assert partial.sigma_max == pytest.approx(dense.sigma_max, rel=1e-8)
    assert partial.sep == pytest.approx(dense.sep, rel=1e-6)


def test_perturbation_norm_identity_chain():
    P = TransitionMatrix(np.eye(3))
    assert perturbation_norm(P) == pytest.approx(1.)
    assert perturbation_norm(P, "gram") == pytest.approx(1.)
    with pytest.raises(InvalidParameterError):
        perturbation_norm(P, "lanczos")


@pytest.mark.parametrize("seed", [4, 5])
def test_perturbation_norm_routes_agree(seed):
    P = random_stochastic(5, seed)
    dense = np.linalg.norm(materialize(PairOperator(P, "perturbation")), 2)
    assert perturbation_norm(P, "gram") == pytest.approx(dense, rel=1e-10)
    assert perturbation_norm(P, "power") == pytest.approx(dense, rel=1e-4)


@pytest.mark.parametrize("n", [4, 10, 50])
def test_perturbation_norm_on_complete_graph(n):
    P, _ = complete_chain(n)
    expected = kn_perturbation_norm_sq(n)
    assert perturbation_norm(P, "gram")**2 == pytest.approx(expected,
                                                            rel=1e-10)
    assert n * expected == pytest.approx(1., abs=2. / n)


@pytest.mark.parametrize("n", [5, 12, 30])
def test_perturbation_norm_bounds_on_complete_graph(n):
    g = complete_graph(n)
    d = n - 1.
    R1 = degree_stats(g, d).R1
    R2 = codegree_stats(g, d).R2
    lower, upper = perturbation_norm_bounds(R1, R2, d, n)
    norm_sq = perturbation_norm(srw_from_graph(g), "gram")**2

    # The lower bound is attained on K_n.
    assert lower == pytest.approx(norm_sq, rel=1e-9)
    assert norm_sq <= upper * (1. + 1e-9)


def test_perturbation_norm_bounds_on_er(small_er):
    for g, P, _ in small_er:
        d = float(g.degrees.mean())
        R1 = degree_stats(g, d).R1
        R2 = codegree_stats(g, d).R2
        lower, upper = perturbation_norm_bounds(R1, R2, d, g.n)
        norm_sq = perturbation_norm(P, "gram")**2
        assert lower <= norm_sq * (1. + 1e-9)
        assert norm_sq <= upper * (1. + 1e-9)


def test_tilde_gamma11_upper_on_complete_graph():
    n = 12
    P, _ = complete_chain(n)
    upper = tilde_gamma11_sq_upper(0., 1. / (n - 1)**2, n - 1., n)
    assert n**2 * tilde_gamma11_sq(P) <= upper
    assert tilde_gamma11_sq_upper(1., 0., 5., 10) == math.inf


def test_k10_is_certified(k10_blocks):
    P, _, usvd, exact, bound = k10_blocks
    assert usvd.sep == pytest.approx((1. - 1. / 81)**2, rel=1e-10)
    assert usvd.sigma_max == pytest.approx(10. / 9, rel=1e-10)
    assert exact.gamma11 == pytest.approx(-0.1)

    sigma_min_sq = float(svd_killed(P).sigma[-1])**2
    for blocks in (exact, bound):
        bounds = sigma_min_bounds(blocks)
        assert bounds.certified
        assert bounds.contains(sigma_min_sq)
        assert bounds.lower_sq <= bounds.upper_sq


def test_exact_blocks_within_bounds(k10_blocks):
    _, _, _, exact, bound = k10_blocks
    slack = 1. + 1e-6
    assert exact.G22_norm <= exact.G22_norm_bound * slack
    assert exact.delta12 <= exact.delta12_bound * slack
    assert exact.delta22 <= exact.delta22_bound * slack
    assert exact.delta >= bound.delta
    assert exact.condition_value <= bound.condition_value
    assert exact.B12_norm == 0.
    assert "g12" not in exact.to_dict()


def test_sigma_bounds_derived_quantities(k10_blocks):
    _, pi, _, exact, _ = k10_blocks
    bounds = sigma_min_bounds(exact)
    assert bounds.unperturbed_projector == pytest.approx(1.)
    assert bounds.projector_upper == pytest.approx(10 * pi.sq_norm)
    assert bounds.inv_n_sigma_lower <= bounds.inv_n_sigma_upper
    assert math.isfinite(bounds.q_norm_bound)


def test_recovery_without_perturbation(k3):
    P, pi = k3
    usvd = unperturbed_svd(P, pi)
    A = materialize(PairOperator(P, "L"))
    U, sigma, Vt = np.linalg.svd(A)
    V = Vt.T
    # The null pair carries no sign coupling; align both with the closed forms.
    U[:, -1] *= np.sign(U[:, -1] @ usvd.u_last)
    V[:, -1] *= np.sign(V[:, -1] @ usvd.v_last)
    synthetic = SvdResult(sigma, U, V)

    recovery = recover_Q(usvd, synthetic, pi)
    assert recovery.q_norm == pytest.approx(0., abs=1e-6)
    assert recovery.w_norm == pytest.approx(0., abs=1e-6)
    assert recovery.projector == pytest.approx(1., rel=1e-6)
    assert recovery.q_within and recovery.w_within


def test_recovery_within_bounds(k10_blocks):
    P, pi, usvd, exact, _ = k10_blocks
    bounds = sigma_min_bounds(exact)
    recovery = recover_Q(usvd, svd_killed(P), pi, bounds)
    assert recovery.q_within
    assert recovery.q_norm < 1.


def test_recovery_rejects_orthogonal_vectors(k3):
    P, pi = k3
    usvd = unperturbed_svd(P, pi)
    U = np.eye(9)
    U[:, -1] = 0.
    U[0, -1], U[1, -1] = 1. / math.sqrt(2), -1. / math.sqrt(2)
    with pytest.raises(RecoveryError):
        recover_Q(usvd, SvdResult(np.ones(9), U, U), pi)


def test_nu_from_eps():
    nu1, nu2 = nu_from_eps(15.)
    assert nu1 == pytest.approx(1. / 3)
    assert nu1 == nu2
    with pytest.raises(InvalidParameterError):
        nu_from_eps(0.)


def test_w_norm_asymptotic():
    assert w_norm_asymptotic(0.2, 100) == math.inf
    assert w_norm_asymptotic(0.1, 100) == pytest.approx(
        8. * 1.21 / (0.5 * 10.))


def test_norm_estimate_report(k10_blocks):
    P, pi, _, exact, _ = k10_blocks
    report = norm_estimate_report(P, pi, exact, 9., 0.5)
    assert len(report["checks"]) == 7
    assert report["all_passed"]
    assert report["n_over_d_sq"] == pytest.approx(10. / 81)


def test_swap_chain_is_not_certified(swap_chain):
    P, pi = swap_chain
    usvd = unperturbed_svd(P, pi)
    assert usvd.sep == pytest.approx(0., abs=1e-20)
    bounds = sigma_min_bounds(stewart_blocks(P, pi, usvd))
    assert not bounds.certified
    assert bounds.upper_sq == math.inf


def test_perturbation_report_is_json_ready():
    n = 12
    g = complete_graph(n)
    P = srw_from_graph(g)
    report = perturbation_report(P, stationary(P), graph=g, d=n - 1.,
                                 epsilon1=0.5)
    text = json.dumps(report)
    assert json.loads(text)["n"] == n
    assert report["gamma11"] == pytest.approx(-1. / n)
    assert report["naive_tmeet"] == naive_tmeet(n) == n
    assert report["certified"]
    assert report["sigma_min_in_bounds"]
    assert report["norm_estimates"]["all_passed"]
    lower, upper = report["perturbation_norm_sq_bounds"]
    assert lower <= report["perturbation_norm"]**2 * (1. + 1e-6) <= \
        upper * (1. + 1e-6)


def test_rank1_proxy_on_complete_graph():
    P, pi = complete_chain(10)
    proxy = rank1_proxy(P, pi, svd_killed(P))
    _, expected = kn_meeting_time(10)
    assert proxy["tmeet_over_n"] == pytest.approx(expected / 10, rel=1e-10)
    assert proxy["proxy_over_n"] == pytest.approx(
        (proxy["tmeet_rank1"] + 1.) / 10)
    assert proxy["error"] <= proxy["error_bound"]
    assert proxy["within"]


def test_report_above_dense_threshold(monkeypatch):
    P = random_stochastic(6, 21)
    pi = stationary(P)
    dense = perturbation_report(P, pi)
    # Same chain through the two-smallest-triplets route.
    monkeypatch.setattr(pairmeet.perturb, "dense_threshold", lambda: 4)
    report = perturbation_report(P, pi)

    assert not unperturbed_svd(P, pi).dense
    assert report["sigma_min_sq"] == pytest.approx(dense["sigma_min_sq"],
                                                   rel=1e-6)
    assert "error" not in report["recovery"]
    assert report["recovery"]["projector"] == pytest.approx(
        dense["recovery"]["projector"], rel=1e-6)
    assert report["rank1"]["within"]
    assert report["rank1"]["tmeet_rank1"] == pytest.approx(
        dense["rank1"]["tmeet_rank1"], rel=1e-6)


def test_report_keeps_going_on_periodic_chain(swap_chain):
    P, pi = swap_chain
    report = perturbation_report(P, pi)
    assert report["sigma_min_sq"] == pytest.approx(0., abs=1e-20)
    assert "error" in report["rank1"]


def test_arpack_failure_is_convergence_error(monkeypatch):
    def _no_convergence(*args, **kwargs):
        raise ArpackNoConvergence("ARPACK error -1: No convergence", [], [])

    monkeypatch.setattr(pairmeet.perturb, "svds", _no_convergence)
    P = random_stochastic(4, 13)
    with pytest.raises(ConvergenceError):
        unperturbed_svd(P, stationary(P), dense=False)


def test_lapack_failure_is_convergence_error(monkeypatch):
    def _no_convergence(*args, **kwargs):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(scipy.linalg, "svd", _no_convergence)
    P = random_stochastic(4, 13)
    with pytest.raises(ConvergenceError):
        unperturbed_svd(P, stationary(P), dense=True)
    with pytest.raises(ConvergenceError):
        svd_killed(P)


@pytest.mark.slow
def test_gamma11_on_many_random_chains():
    rng = np.random.default_rng(2024)
    for seed in range(100):
        n = int(rng.integers(2, 31))
        P = random_stochastic(n, 1000 + seed)
        assert abs(gamma11(P, stationary(P)) + 1. / n) <= 1e-12
    # end of for


@pytest.mark.slow
def test_sandwich_on_twenty_dense_er_samples():
    certified = 0
    for g, P, pi in er_chains([30], 0.7, 20, master_seed=5):
        usvd = unperturbed_svd(P, pi)
        blocks = stewart_blocks(P, pi, usvd)
        assert blocks.tilde_gamma11_sq == pytest.approx(
            blocks.gamma11**2 + blocks.g21_sq, rel=1e-10)

        bounds = sigma_min_bounds(blocks)
        if bounds.certified:
            certified += 1
            sigma_min = float(svd_killed(P).sigma[-1])
            assert bounds.contains(sigma_min**2)
    # end of for
    assert certified >= 5


@pytest.mark.slow
def test_norm_sandwich_on_er_with_nominal_degree():
    samples = er_chains([50], 0.5, 20, master_seed=6)
    assert len(samples) == 20
    for g, P, _ in samples:
        d = 0.5 * 50
        R1 = degree_stats(g, d).R1
        R2 = codegree_stats(g, d).R2
        lower, upper = perturbation_norm_bounds(R1, R2, d, g.n)
        norm_sq = perturbation_norm(P, "gram")**2
        assert lower <= norm_sq * (1. + 1e-9)
        assert norm_sq <= upper * (1. + 1e-9)
    # end of for


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_projector_and_rank1_on_dense_er(seed):
    g = er_sample(ErParams(50, p=0.6), seed)
    if g.isolated_vertices() or not g.is_connected():
        pytest.skip("disconnected sample")
    P = srw_from_graph(g)
    report = perturbation_report(P, stationary(P), graph=g, d=30.)

    assert report["sigma_min_sq"] > 0.
    if report["certified"]:
        assert report["sigma_min_in_bounds"]
    assert "error" not in report["recovery"]
    assert report["recovery"]["projector_deviation"] <= 0.2

    rank1 = report["rank1"]
    assert rank1["within"]
    assert abs(rank1["proxy_over_n"] - 1.) < 0.1
    assert abs(rank1["tmeet_over_n"] - 1.) < 0.1
