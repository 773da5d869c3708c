import numpy as np
import pytest

from pairmeet import utils
from pairmeet.graphs import ErParams
from pairmeet.graphs import er_sample
from pairmeet.graphs import complete_graph
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import srw_from_graph
from pairmeet.markov import stationary
from pairmeet.markov import check_aperiodic


def complete_chain(n):
    P = srw_from_graph(complete_graph(n))
    return P, stationary(P)


def kn_meeting_time(n):
    """Off-diagonal M and t_meet^pi on K_n."""
    return (n - 1)**2 / (n - 2), (n - 1)**3 / (n * (n - 2))


def er_chains(sizes, p, count, master_seed=0):
    """(graph, P, pi) for `count` connected aperiodic ER samples.

    Sizes cycle through `sizes`; samples that fail the checks are skipped.
    """
    out = []
    seeds = utils.spawn_seeds(master_seed, 50 * count)
    for i, seed in enumerate(seeds):
        n = sizes[i % len(sizes)]
        params = ErParams(n, p=p)
        g = er_sample(params, seed)
        if g.isolated_vertices() or not g.is_connected():
            continue
        P = srw_from_graph(g)
        if not check_aperiodic(P):
            continue
        out.append((g, P, stationary(P)))
        if len(out) == count:
            break
    # end of for
    return out


def random_stochastic(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.random((n, n)) + 1e-3
    return TransitionMatrix(A / A.sum(axis=1, keepdims=True))


@pytest.fixture
def k3():
    return complete_chain(3)


@pytest.fixture
def k5():
    return complete_chain(5)


@pytest.fixture
def swap_chain():
    """The simple random walk on K2: states swap every step."""
    return complete_chain(2)


@pytest.fixture(scope="session")
def small_er():
    return er_chains([6, 8, 10, 12], 0.6, 8, master_seed=17)
