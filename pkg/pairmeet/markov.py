from __future__ import annotations
from math import gcd

import networkx as nx
import numpy as np
import scipy.linalg

from pairmeet import utils
from pairmeet.graphs import Graph
from pairmeet.logging import write_log
from pairmeet.exception import InvalidParameterError
from pairmeet.exception import DegenerateGraphError
from pairmeet.exception import NoUniqueStationaryError
from pairmeet.exception import InconsistencyError

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


class TransitionMatrix:
    """Row-stochastic n x n matrix, immutable after construction.

    `degrees` is set when P is the simple random walk of a graph; the
    stationary distribution then has the closed form deg / sum(deg).
    """

    def __init__(self, P, degrees=None):
        P = np.array(P, dtype=float)

        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            err_msg = "P should be a non-empty square matrix, " \
                      "not shape %s."%(str(P.shape))
            write_log(err_msg, "error")
            raise InvalidParameterError("P", P.shape, err_msg)

        if np.any(P < 0.) or np.any(P > 1.):
            err_msg = "Entries of P should lie in [0, 1]."
            write_log(err_msg, "error")
            raise InvalidParameterError("P", None, err_msg)

        row_err = np.max(np.abs(P.sum(axis=1) - 1.))
        if row_err > ROW_SUM_TOL:
            err_msg = "Rows of P should sum to 1 " \
                      "(max deviation %.3e)."%(row_err)
            write_log(err_msg, "error")
            raise InvalidParameterError("P", row_err, err_msg)

        P.setflags(write=False)
        self._P = P

        if degrees is not None:
            degrees = np.array(degrees, dtype=np.int64)
            degrees.setflags(write=False)
        self._degrees = degrees

    def __str__(self):
        return "%s(n=%d)"%(self.__class__.__name__, self.n)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._P.shape[0]

    @property
    def P(self) -> np.ndarray:
        return self._P

    @property
    def degrees(self):
        return self._degrees

    def lazy(self) -> TransitionMatrix:
        """The lazy chain (I + P) / 2, which is always aperiodic."""
        lazy_P = 0.5 * (np.eye(self.n) + self._P)
        # SRW closed form still applies: pi is unchanged by lazification.
        return TransitionMatrix(lazy_P, degrees=self._degrees)

    def to_csv(self, fpath: str):
        np.savetxt(fpath, self._P, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, fpath: str) -> TransitionMatrix:
        return cls(np.loadtxt(fpath, delimiter=",", ndmin=2))


class StationaryDistribution:

    def __init__(self, pi):
        pi = np.array(pi, dtype=float)
        pi.setflags(write=False)
        self._pi = pi
        self._sq_norm = float(pi @ pi)

    def __str__(self):
        return "%s(n=%d, sq_norm=%.6g)"%(self.__class__.__name__,
                                         self.n,
                                         self.sq_norm)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._pi.shape[0]

    @property
    def pi(self) -> np.ndarray:
        return self._pi

    @property
    def sq_norm(self) -> float:
        return self._sq_norm

    def pair_vector(self) -> np.ndarray:
        """pi ⊗ pi flattened in the pair-space order."""
        return np.outer(self._pi, self._pi).ravel()


def srw_from_graph(g: Graph) -> TransitionMatrix:
    utils.check_type("g", g, Graph)

    isolated = g.isolated_vertices()
    if isolated:
        vertex = isolated[0]
        err_msg = "Vertex %d is isolated; the simple random walk " \
                  "is undefined there."%(vertex)
        write_log(err_msg, "error")
        raise DegenerateGraphError(vertex, err_msg)

    degrees = g.degrees
    P = g.adjacency / degrees[:, None].astype(float)
    return TransitionMatrix(P, degrees=degrees)


def support_digraph(P: TransitionMatrix) -> nx.DiGraph:
    rows, cols = np.nonzero(P.P > 0.)
    G = nx.DiGraph()
    G.add_nodes_from(range(P.n))
    G.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return G


def check_irreducible(P: TransitionMatrix) -> bool:
    utils.check_type("P", P, TransitionMatrix)
    return nx.is_strongly_connected(support_digraph(P))


def check_aperiodic(P: TransitionMatrix) -> bool:
    utils.check_type("P", P, TransitionMatrix)
    return nx.is_aperiodic(support_digraph(P))


def period(P: TransitionMatrix):
    """Period of an irreducible chain; None when P is reducible.

    BFS levels from state 0: the period is the gcd over support edges
    (u, v) of level(u) + 1 - level(v).
    """
    utils.check_type("P", P, TransitionMatrix)
    G = support_digraph(P)
    if not nx.is_strongly_connected(G):
        return None

    level = nx.single_source_shortest_path_length(G, 0)
    g = 0
    for u, v in G.edges():
        g = gcd(g, abs(level[u] + 1 - level[v]))
    # end of for
    return g


def stationary(P: TransitionMatrix) -> StationaryDistribution:
    utils.check_type("P", P, TransitionMatrix)

    if not check_irreducible(P):
        err_msg = "P is reducible; its stationary distribution " \
                  "is not unique."
        write_log(err_msg, "error")
        raise NoUniqueStationaryError(err_msg)

    if P.degrees is not None:
        degrees = P.degrees.astype(float)
        return StationaryDistribution(degrees / degrees.sum())

    # (P^t - I) pi = 0 with the normalisation row appended, by QR.
    n = P.n
    A = np.vstack([P.P.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.
    Q, R = scipy.linalg.qr(A, mode="economic")
    pi = scipy.linalg.solve_triangular(R, Q.T @ b)

    pi = np.maximum(pi, 0.)
    pi /= pi.sum()

    residual = float(np.max(np.abs(pi @ P.P - pi)))
    write_log("Stationary solve residual %.3e"%(residual), "debug")
    if not residual <= STATIONARY_TOL:
        err_msg = "Stationary solve residual %.3e exceeds %.1e."%(
            residual, STATIONARY_TOL)
        write_log(err_msg, "error")
        raise InconsistencyError(residual, err_msg)
    return StationaryDistribution(pi)
