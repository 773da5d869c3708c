import numpy as np
import pytest

from pairmeet.graphs import cycle_graph
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.meeting import MeetingTimeMatrix
from pairmeet.meeting import SvdResult
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import diagonal_identity
from pairmeet.meeting import recursion_residual
from pairmeet.meeting import svd_killed
from pairmeet.meeting import spectral_tmeet
from pairmeet.meeting import rank_k_tmeet
from pairmeet.exception import InfiniteMeetingTimeError
from pairmeet.exception import InsufficientDataError
from pairmeet.exception import InvalidParameterError
from pairmeet.exception import DimensionError

from conftest import complete_chain
from conftest import kn_meeting_time
from conftest import random_stochastic
from conftest import er_chains


@pytest.mark.parametrize("n", [3, 4, 5, 8])
def test_complete_graph_closed_form(n):
    P, pi = complete_chain(n)
    M = exact_meeting_times(P)
    m_off, t_pi = kn_meeting_time(n)

    off = ~np.eye(n, dtype=bool)
    np.testing.assert_allclose(M.M[off], m_off, rtol=1e-10)
    assert np.all(np.diag(M.M) == 0.)
    assert tmeet_pi(M, pi) == pytest.approx(t_pi, rel=1e-10)


def test_k3_and_k5_values(k3, k5):
    assert tmeet_pi(exact_meeting_times(k3[0]), k3[1]) \
        == pytest.approx(8. / 3, rel=1e-10)
    assert tmeet_pi(exact_meeting_times(k5[0]), k5[1]) \
        == pytest.approx(64. / 15, rel=1e-10)


def test_exact_solution_properties(small_er):
    for _, P, pi in small_er:
        M = exact_meeting_times(P)
        np.testing.assert_allclose(M.M, M.M.T, rtol=1e-9, atol=1e-9)
        assert np.all(M.M[~np.eye(P.n, dtype=bool)] >= 1.)
        assert diagonal_identity(M, pi) == pytest.approx(1., abs=1e-9)
        assert recursion_residual(P, M) < 1e-8


def test_krylov_matches_dense(small_er):
    _, P, _ = small_er[-1]
    dense = exact_meeting_times(P, solver="dense")
    krylov = exact_meeting_times(P, solver="krylov")
    np.testing.assert_allclose(krylov.M, dense.M, rtol=1e-7)


def test_generic_chain_diagonal_identity():
    P = random_stochastic(6, 11)
    pi = stationary(P)
    M = exact_meeting_times(P)
    assert diagonal_identity(M, pi) == pytest.approx(1., abs=1e-9)


@pytest.mark.parametrize("solver", ["dense", "krylov"])
def test_periodic_chains_are_infinite(swap_chain, solver):
    P, _ = swap_chain
    with pytest.raises(InfiniteMeetingTimeError) as info:
        exact_meeting_times(P, solver=solver)
    assert info.value.period == 2

    with pytest.raises(InfiniteMeetingTimeError):
        exact_meeting_times(srw_from_graph(cycle_graph(4)), solver=solver)


def test_unknown_solver(k3):
    with pytest.raises(InvalidParameterError):
        exact_meeting_times(k3[0], solver="qr")


def test_dimension_mismatch(k3, k5):
    with pytest.raises(DimensionError):
        tmeet_pi(exact_meeting_times(k3[0]), k5[1])


def test_meeting_matrix_csv(tmp_path, k3):
    M = exact_meeting_times(k3[0])
    fpath = str(tmp_path / "M.csv")
    M.to_csv(fpath)
    np.testing.assert_allclose(np.loadtxt(fpath, delimiter=","), M.M)
    assert MeetingTimeMatrix(M.raw).M[0, 1] == M.M[0, 1]


def test_full_svd_properties():
    P = random_stochastic(4, 7)
    svd = svd_killed(P)
    assert not svd.partial
    assert svd.num_held == 16
    assert np.all(np.diff(svd.sigma) <= 1e-14)
    np.testing.assert_allclose(svd.U.T @ svd.U, np.eye(16), atol=1e-10)
    np.testing.assert_allclose(svd.V.T @ svd.V, np.eye(16), atol=1e-10)

    sigma, u, v = svd.triplet(16)
    assert sigma == svd.sigma[-1]
    idx = np.flatnonzero(np.abs(u) > 1e-12 * np.abs(u).max())[0]
    assert u[idx] > 0.


@pytest.mark.parametrize("n", [3, 5])
def test_spectral_matches_exact(n):
    P, pi = complete_chain(n)
    exact = tmeet_pi(exact_meeting_times(P), pi)
    assert spectral_tmeet(svd_killed(P), pi) == pytest.approx(exact, rel=1e-9)


def test_spectral_matches_exact_on_er(small_er):
    for _, P, pi in small_er[:3]:
        exact = tmeet_pi(exact_meeting_times(P), pi)
        assert spectral_tmeet(svd_killed(P), pi) \
            == pytest.approx(exact, rel=1e-8)


def test_rank_k_error_within_bound():
    P = random_stochastic(5, 21)
    pi = stationary(P)
    svd = svd_killed(P)
    exact = spectral_tmeet(svd, pi)

    for k in (1, 2, 5, 10, 24):
        approx = rank_k_tmeet(svd, pi, k)
        assert approx.certified
        assert abs(approx.value - exact) <= approx.bound * (1. + 1e-9)

    full = rank_k_tmeet(svd, pi, 25)
    assert full.bound == 0.
    assert full.value == pytest.approx(exact, rel=1e-12)

    with pytest.raises(InvalidParameterError):
        rank_k_tmeet(svd, pi, 26)


def test_partial_svd_matches_full():
    P = random_stochastic(5, 8)
    pi = stationary(P)
    full = svd_killed(P)
    partial = svd_killed(P, k_smallest=3)

    assert partial.partial
    assert partial.num_held == 3
    np.testing.assert_allclose(partial.sigma, full.sigma[-3:], rtol=1e-8)
    np.testing.assert_allclose(partial.U.T @ partial.U, np.eye(3),
                               atol=1e-8)

    a = rank_k_tmeet(partial, pi, 2)
    b = rank_k_tmeet(full, pi, 2)
    assert a.value == pytest.approx(b.value, rel=1e-7)
    assert a.bound == pytest.approx(b.bound, rel=1e-7)


def test_partial_svd_limits():
    P = random_stochastic(4, 9)
    pi = stationary(P)
    partial = svd_killed(P, k_smallest=2)

    assert partial.holds(16) and partial.holds(15)
    assert not partial.holds(14)
    with pytest.raises(InsufficientDataError):
        partial.triplet(14)
    with pytest.raises(InsufficientDataError):
        spectral_tmeet(partial, pi)
    with pytest.raises(InsufficientDataError):
        rank_k_tmeet(partial, pi, 2)
    with pytest.raises(InvalidParameterError):
        svd_killed(P, k_smallest=17)

    near_full = svd_killed(P, k_smallest=15)
    assert near_full.partial and near_full.num_held == 15


def test_swap_chain_has_zero_singular_value(swap_chain):
    P, pi = swap_chain
    svd = svd_killed(P)
    assert svd.sigma[-1] < 1e-12
    with pytest.raises(InfiniteMeetingTimeError):
        spectral_tmeet(svd, pi)
    with pytest.raises(InfiniteMeetingTimeError):
        rank_k_tmeet(svd, pi, 1)


def test_svd_csv(tmp_path):
    svd = SvdResult([2., 1.], np.eye(4)[:, :2], np.eye(4)[:, :2],
                    partial=True)
    fpath = str(tmp_path / "s.csv")
    svd.to_csv(fpath)
    with open(fpath) as fin:
        lines = fin.read().splitlines()
    assert lines[0] == "index,sigma"
    assert lines[1] == "3,2"
    assert lines[2] == "4,1"


@pytest.fixture(scope="module")
def fifty_er():
    return er_chains(list(range(4, 21)), 0.6, 50, master_seed=11)


@pytest.mark.slow
def test_spectral_matches_exact_on_fifty_er(fifty_er):
    assert len(fifty_er) == 50
    for _, P, pi in fifty_er:
        exact = tmeet_pi(exact_meeting_times(P), pi)
        assert spectral_tmeet(svd_killed(P), pi) \
            == pytest.approx(exact, rel=1e-8)
    # end of for


@pytest.mark.slow
def test_rank_k_bound_on_fifty_er(fifty_er):
    for _, P, pi in fifty_er:
        svd = svd_killed(P)
        exact = tmeet_pi(exact_meeting_times(P), pi)
        dim = P.n**2
        for k in (1, 2, 4, 8, dim):
            approx = rank_k_tmeet(svd, pi, k)
            assert abs(approx.value - exact) <= \
                approx.bound * (1. + 1e-9) + 1e-9 * exact
        # end of for
        assert rank_k_tmeet(svd, pi, dim).bound == 0.
    # end of for
