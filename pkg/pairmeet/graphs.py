from __future__ import annotations
from dataclasses import dataclass
from typing import List, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp

from pairmeet import utils
from pairmeet.logging import write_log
from pairmeet.exception import InvalidParameterError
from pairmeet.exception import GraphFormatError


class Graph:
    """Undirected simple graph on the vertices 0, ..., n-1.

    The adjacency matrix is stored as a read-only integer array, so a Graph
    can be shared freely between threads and processes.
    """

    def __init__(self, adjacency):
        adjacency = np.array(adjacency, dtype=np.int64)

        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            err_msg = "adjacency should be a square matrix, " \
                      "not shape %s."%(str(adjacency.shape))
            write_log(err_msg, "error")
            raise InvalidParameterError("adjacency", adjacency.shape, err_msg)

        if np.any((adjacency != 0) & (adjacency != 1)):
            err_msg = "adjacency entries should be 0 or 1."
            write_log(err_msg, "error")
            raise InvalidParameterError("adjacency", None, err_msg)

        if not np.array_equal(adjacency, adjacency.T):
            err_msg = "adjacency should be symmetric."
            write_log(err_msg, "error")
            raise InvalidParameterError("adjacency", None, err_msg)

        if np.any(np.diag(adjacency) != 0):
            err_msg = "adjacency should have a zero diagonal (no self-loops)."
            write_log(err_msg, "error")
            raise InvalidParameterError("adjacency", None, err_msg)

        adjacency.setflags(write=False)
        self._adjacency = adjacency
        self._degrees = adjacency.sum(axis=1)
        self._degrees.setflags(write=False)

    def __str__(self):
        return "%s(n=%d, m=%d)"%(self.__class__.__name__,
                                 self.n,
                                 self.num_edges)

    def __repr__(self):
        return str(self)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return False
        return np.array_equal(self._adjacency, other._adjacency)

    def __hash__(self):
        return hash(self._adjacency.tobytes())

    @property
    def n(self) -> int:
        return self._adjacency.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self._adjacency

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def num_edges(self) -> int:
        return int(self._degrees.sum()) // 2

    def edges(self) -> List[Tuple[int, int]]:
        """Edges (i, j) with i < j, 0-based, in lexicographic order."""
        rows, cols = np.nonzero(np.triu(self._adjacency, k=1))
        return list(zip(rows.tolist(), cols.tolist()))

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self._adjacency[i])

    def to_sparse(self):
        return sp.csr_matrix(self._adjacency)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges())
        return g

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        return nx.is_connected(self.to_networkx())

    def isolated_vertices(self) -> List[int]:
        return np.flatnonzero(self._degrees == 0).tolist()

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> Graph:
        nodes = sorted(g.nodes())
        return cls(nx.to_numpy_array(g, nodelist=nodes, dtype=np.int64))

    @classmethod
    def from_edges(cls, n: int, edges) -> Graph:
        """Build from 0-based (i, j) pairs."""
        utils.check_nonnegative_int("n", n)
        adjacency = np.zeros((n, n), dtype=np.int64)
        for i, j in edges:
            adjacency[i, j] = 1
            adjacency[j, i] = 1
        return cls(adjacency)


class ErParams:
    """Erdős–Rényi parameters G(n, p) with p = min(c n^(beta-1), 1).

    An explicit `p` overrides (beta, c). The mean-degree scale is d = n p
    in both cases, including when p saturates at 1.
    """

    def __init__(self,
                 n: int,
                 beta: float = None,
                 c: float = None,
                 p: float = None):

        utils.check_positive_int("n", n)
        self._n = n
        self._beta = beta
        self._c = c

        if p is None:
            if beta is None or c is None:
                err_msg = "Either p or both beta and c should be given."
                write_log(err_msg, "error")
                raise InvalidParameterError("p", p, err_msg)

            utils.check_positive_float("beta", beta)
            utils.check_positive_float("c", c)
            if beta > 1:
                err_msg = "beta should lie in (0, 1], not %s."%(beta)
                write_log(err_msg, "error")
                raise InvalidParameterError("beta", beta, err_msg)
            p = min(c * n**(beta - 1.), 1.)

        utils.check_probability("p", p)
        self._p = float(p)

    def __str__(self):
        return "%s(n=%d, p=%.6g, d=%.6g)"%(self.__class__.__name__,
                                           self.n,
                                           self.p,
                                           self.d)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._n

    @property
    def beta(self):
        return self._beta

    @property
    def c(self):
        return self._c

    @property
    def p(self) -> float:
        return self._p

    @property
    def d(self) -> float:
        return self._n * self._p


@dataclass(frozen=True)
class DegreeStats:
    eps_i: np.ndarray
    R1: float


@dataclass(frozen=True)
class CodegreeStats:
    """Codegree deviations over unordered pairs k < l.

    `eps_pair` is condensed: entry t belongs to the t-th pair of
    `np.triu_indices(n, 1)`; `codegrees` follows the same order.
    """
    eps_pair: np.ndarray
    codegrees: np.ndarray
    R2: float


@dataclass(frozen=True)
class EventFlags:
    f_nu1: bool
    f_nu1_nu2: bool
    f_sigma: bool


@dataclass(frozen=True)
class RegularityReport:
    R1: float
    R2: float
    sigma2_scaled: float
    r1_ok: bool
    r2_ok: bool
    sigma_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.r1_ok and self.r2_ok and self.sigma_ok


def er_sample(params: ErParams, seed: int) -> Graph:
    """Sample G(n, p).

    One uniform draw per unordered pair i < j in lexicographic order, so the
    edge set is a deterministic function of (params, seed).
    """
    utils.check_type("params", params, ErParams)
    n = params.n
    rng = utils.make_rng(seed)

    rows, cols = np.triu_indices(n, k=1)
    draws = rng.random(rows.size)
    keep = draws < params.p

    adjacency = np.zeros((n, n), dtype=np.int64)
    adjacency[rows[keep], cols[keep]] = 1
    adjacency[cols[keep], rows[keep]] = 1
    write_log("Sampled %s with seed %d: %d edges"%(params,
                                                    seed,
                                                    int(keep.sum())),
              "debug")
    return Graph(adjacency)


def _check_scale(d):
    utils.check_positive_float("d", d)


def degree_stats(g: Graph, d: float) -> DegreeStats:
    utils.check_type("g", g, Graph)
    _check_scale(d)

    eps_i = g.degrees / d - 1.
    R1 = float(np.max(np.abs(eps_i))) if g.n > 0 else 0.
    return DegreeStats(eps_i=eps_i, R1=R1)


def codegrees(g: Graph, method: str = "sparse") -> np.ndarray:
    """Common-neighbour counts as a dense n x n matrix.

    "sparse" multiplies the CSR adjacency with itself, which touches only
    neighbour-list intersections; "dense" is the O(n^3) reference.
    """
    if method == "sparse":
        A = g.to_sparse()
        return np.asarray((A @ A).todense(), dtype=np.int64)
    elif method == "dense":
        A = g.adjacency
        return A @ A
    else:
        err_msg = "method=%s is not defined!"%(method)
        write_log(err_msg, "error")
        raise InvalidParameterError("method", method, err_msg)


def codegree_stats(g: Graph, d: float, method: str = "sparse") -> CodegreeStats:
    utils.check_type("g", g, Graph)
    _check_scale(d)

    if g.n < 2:
        err_msg = "codegree statistics need n >= 2, not %d."%(g.n)
        write_log(err_msg, "error")
        raise InvalidParameterError("n", g.n, err_msg)

    C = codegrees(g, method)
    rows, cols = np.triu_indices(g.n, k=1)
    counts = C[rows, cols]
    eps_pair = (g.n / d**2) * counts - 1.
    return CodegreeStats(eps_pair=eps_pair,
                         codegrees=counts,
                         R2=float(np.max(np.abs(eps_pair))))


def adjacency_sigma2(g: Graph, d: float) -> float:
    """Second-largest singular value of A / sqrt(d).

    A is symmetric, so its singular values are the absolute eigenvalues.
    """
    utils.check_type("g", g, Graph)
    _check_scale(d)

    if g.n < 2:
        err_msg = "sigma2 needs n >= 2, not %d."%(g.n)
        write_log(err_msg, "error")
        raise InvalidParameterError("n", g.n, err_msg)

    eigvals = np.linalg.eigvalsh(g.adjacency.astype(float) / np.sqrt(d))
    magnitudes = np.sort(np.abs(eigvals))[::-1]
    return float(magnitudes[1])


def event_flags(g: Graph,
                d: float,
                nu1: float,
                nu2: float,
                sigma2_limit: float = None) -> EventFlags:
    if sigma2_limit is None:
        sigma2_limit = utils.get_setting("EXPERIMENT", "SIGMA2_LIMIT")

    R1 = degree_stats(g, d).R1
    R2 = codegree_stats(g, d).R2
    f_nu1 = R1 <= nu1
    return EventFlags(f_nu1=bool(f_nu1),
                      f_nu1_nu2=bool(f_nu1 and R2 <= nu2),
                      f_sigma=bool(adjacency_sigma2(g, d) <= sigma2_limit))


def check_regularity_conditions(g: Graph,
                                d: float,
                                tol: float,
                                sigma2_limit: float = None) -> RegularityReport:
    """Evaluate the three regularity conditions for a graph sequence member.

    Purely diagnostic: R1 <= tol, R2 <= tol and sigma2(A)/sqrt(d) <= 8.
    """
    utils.check_positive_float("tol", tol)
    if sigma2_limit is None:
        sigma2_limit = utils.get_setting("EXPERIMENT", "SIGMA2_LIMIT")

    R1 = degree_stats(g, d).R1
    R2 = codegree_stats(g, d).R2
    sigma2_scaled = adjacency_sigma2(g, d)
    return RegularityReport(R1=R1,
                            R2=R2,
                            sigma2_scaled=sigma2_scaled,
                            r1_ok=bool(R1 <= tol),
                            r2_ok=bool(R2 <= tol),
                            sigma_ok=bool(sigma2_scaled <= sigma2_limit))


# Deterministic families
def complete_graph(n: int) -> Graph:
    utils.check_nonnegative_int("n", n)
    return Graph.from_networkx(nx.complete_graph(n))


def cycle_graph(n: int) -> Graph:
    utils.check_nonnegative_int("n", n)
    if n < 3:
        err_msg = "A simple cycle needs n >= 3, not %d."%(n)
        write_log(err_msg, "error")
        raise InvalidParameterError("n", n, err_msg)
    return Graph.from_networkx(nx.cycle_graph(n))


def path_graph(n: int) -> Graph:
    utils.check_nonnegative_int("n", n)
    return Graph.from_networkx(nx.path_graph(n))


def star_graph(leaves: int) -> Graph:
    """Star with centre 0 and vertices 1..leaves as leaves."""
    utils.check_nonnegative_int("leaves", leaves)
    return Graph.from_networkx(nx.star_graph(leaves))


def empty_graph(n: int) -> Graph:
    utils.check_nonnegative_int("n", n)
    return Graph(np.zeros((n, n), dtype=np.int64))


# Text format: "n m" then m lines "u v" (1-based, u < v)
def read_graph(fpath: str) -> Graph:
    with open(fpath, "rt") as fin:
        lines = [line.strip() for line in fin]
    return parse_graph(lines)


def parse_graph(lines) -> Graph:
    numbered = [(i + 1, line) for i, line in enumerate(lines)
                if line and not line.startswith("#")]
    if not numbered:
        err_msg = "Graph file is empty."
        write_log(err_msg, "error")
        raise GraphFormatError(0, err_msg)

    line_no, header = numbered[0]
    fields = header.split()
    if len(fields) != 2:
        err_msg = "Line %d: header should be 'n m', not %r."%(line_no, header)
        write_log(err_msg, "error")
        raise GraphFormatError(line_no, err_msg)
    try:
        n, m = int(fields[0]), int(fields[1])
    except ValueError:
        err_msg = "Line %d: n and m should be integers."%(line_no)
        write_log(err_msg, "error")
        raise GraphFormatError(line_no, err_msg)

    if n < 0 or m < 0:
        err_msg = "Line %d: n and m cannot be negative."%(line_no)
        write_log(err_msg, "error")
        raise GraphFormatError(line_no, err_msg)

    body = numbered[1:]
    if len(body) != m:
        err_msg = "Header announces %d edges but %d were found."%(m, len(body))
        write_log(err_msg, "error")
        raise GraphFormatError(line_no, err_msg)

    seen = set()
    edges = []
    for line_no, line in body:
        fields = line.split()
        try:
            u, v = int(fields[0]), int(fields[1])
            if len(fields) != 2:
                raise ValueError()
        except (ValueError, IndexError):
            err_msg = "Line %d: edge should be 'u v', not %r."%(line_no, line)
            write_log(err_msg, "error")
            raise GraphFormatError(line_no, err_msg)

        if u == v:
            err_msg = "Line %d: self-loop at vertex %d."%(line_no, u)
            write_log(err_msg, "error")
            raise GraphFormatError(line_no, err_msg)

        if not (1 <= u <= n and 1 <= v <= n):
            err_msg = "Line %d: vertex index out of range [1, %d]."%(line_no,
                                                                     n)
            write_log(err_msg, "error")
            raise GraphFormatError(line_no, err_msg)

        key = (min(u, v), max(u, v))
        if key in seen:
            err_msg = "Line %d: duplicate edge %d-%d."%(line_no, *key)
            write_log(err_msg, "error")
            raise GraphFormatError(line_no, err_msg)
        seen.add(key)
        edges.append((key[0] - 1, key[1] - 1))
    # end of for

    return Graph.from_edges(n, edges)


def format_graph(g: Graph) -> str:
    edges = g.edges()
    lines = ["%d %d"%(g.n, len(edges))]
    lines.extend("%d %d"%(i + 1, j + 1) for i, j in edges)
    return "\n".join(lines) + "\n"


def write_graph(g: Graph, fpath: str):
    with open(fpath, "wt") as fout:
        fout.write(format_graph(g))
