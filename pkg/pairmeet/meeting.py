from __future__ import annotations
from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.linalg
import scipy.linalg.lapack
from scipy.sparse.linalg import LinearOperator
from scipy.sparse.linalg import gmres
from scipy.sparse.linalg import svds
from scipy.sparse.linalg import ArpackError

from pairmeet import utils
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.markov import check_irreducible
from pairmeet.markov import period
from pairmeet.pairspace import PairOperator
from pairmeet.pairspace import materialize
from pairmeet.pairspace import dense_threshold
from pairmeet.logging import write_log
from pairmeet.exception import DimensionError
from pairmeet.exception import ConvergenceError
from pairmeet.exception import InfiniteMeetingTimeError
from pairmeet.exception import InsufficientDataError
from pairmeet.exception import InvalidParameterError


class MeetingTimeMatrix:
    """Expected meeting times M[i, j] = E[tau_meet(i, j)], zero diagonal.

    `raw` keeps the solution w of (I - (P⊗P)E) w = 1 reshaped to n x n,
    diagonal included; M is raw with its diagonal zeroed.
    """

    def __init__(self, raw):
        raw = np.array(raw, dtype=float)
        M = raw.copy()
        np.fill_diagonal(M, 0.)
        raw.setflags(write=False)
        M.setflags(write=False)
        self._raw = raw
        self._M = M

    def __str__(self):
        return "%s(n=%d)"%(self.__class__.__name__, self.n)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._M.shape[0]

    @property
    def M(self) -> np.ndarray:
        return self._M

    @property
    def raw(self) -> np.ndarray:
        return self._raw

    def to_csv(self, fpath: str):
        np.savetxt(fpath, self._M, delimiter=",", fmt="%.17g")

    @classmethod
    def from_solution(cls, w, n: int) -> MeetingTimeMatrix:
        return cls(np.asarray(w, dtype=float).reshape(n, n))


class SvdResult:
    """Singular triplets of L_kill sorted non-increasingly.

    In partial mode only the m smallest triplets are held; they occupy the
    global (1-based) positions dim-m+1, ..., dim.
    """

    def __init__(self, sigma, U, V, partial: bool = False):
        sigma = np.array(sigma, dtype=float)
        U = np.array(U, dtype=float)
        V = np.array(V, dtype=float)
        for arr in (sigma, U, V):
            arr.setflags(write=False)
        self._sigma = sigma
        self._U = U
        self._V = V
        self._partial = partial

    def __str__(self):
        return "%s(dim=%d, held=%d, partial=%s)"%(self.__class__.__name__,
                                                  self.dim,
                                                  self.num_held,
                                                  self.partial)

    def __repr__(self):
        return str(self)

    @property
    def sigma(self) -> np.ndarray:
        return self._sigma

    @property
    def U(self) -> np.ndarray:
        return self._U

    @property
    def V(self) -> np.ndarray:
        return self._V

    @property
    def partial(self) -> bool:
        return self._partial

    @property
    def dim(self) -> int:
        return self._U.shape[0]

    @property
    def n(self) -> int:
        return int(round(math.sqrt(self.dim)))

    @property
    def num_held(self) -> int:
        return self._sigma.shape[0]

    def holds(self, i: int) -> bool:
        return self.dim - self.num_held + 1 <= i <= self.dim

    def triplet(self, i: int):
        """(sigma_i, u_i, v_i) for the global 1-based position i."""
        if not self.holds(i):
            err_msg = "Triplet %d is not held (positions %d..%d)."% \
                      (i, self.dim - self.num_held + 1, self.dim)
            write_log(err_msg, "error")
            raise InsufficientDataError(err_msg)
        local = i - (self.dim - self.num_held) - 1
        return self._sigma[local], self._U[:, local], self._V[:, local]

    def to_csv(self, fpath: str):
        """Singular values only, one per line, with their global index."""
        first = self.dim - self.num_held + 1
        table = np.column_stack([np.arange(first, self.dim + 1), self._sigma])
        np.savetxt(fpath,
                   table,
                   delimiter=",",
                   fmt=["%d", "%.17g"],
                   header="index,sigma",
                   comments="")


@dataclass(frozen=True)
class RankKApprox:
    k: int
    value: float
    bound: float
    certified: bool


def _infinite_meeting_time(P, rcond=None, detail=""):
    per = period(P)
    err_msg = "L_kill is singular or near-singular%s; meeting times are " \
              "infinite for some pairs (period=%s)."%(detail, per)
    write_log(err_msg, "error")
    return InfiniteMeetingTimeError(period=per, rcond=rcond, message=err_msg)


def _dense_solve(P: TransitionMatrix, b):
    A = materialize(PairOperator(P, "L_kill"))
    limit = utils.get_setting("MEETING", "CONDITION_LIMIT")

    anorm = np.linalg.norm(A, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    rcond, info = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")

    if info != 0 or not np.isfinite(rcond) or rcond * limit < 1.:
        raise _infinite_meeting_time(P,
                                     rcond,
                                     " (estimated condition %.3e)"%(
                                         1. / rcond if rcond > 0 else np.inf))

    write_log("Dense LU solve, estimated condition %.3e"%(1. / rcond),
              "debug")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def _krylov(op, b, rtol, maxiter_total):
    """GMRES with at most `maxiter_total` inner iterations."""
    dim = b.shape[0]
    restart = min(utils.get_setting("MEETING", "KRYLOV_RESTART"), dim)
    cycles = max(1, math.ceil(maxiter_total / restart))
    x, info = gmres(op,
                    b,
                    rtol=rtol,
                    atol=0.,
                    restart=restart,
                    maxiter=cycles)
    residual = np.linalg.norm(b - op.matvec(x)) / np.linalg.norm(b)
    return x, info, residual


def _krylov_solve(P: TransitionMatrix, b):
    n = P.n
    if check_irreducible(P):
        per = period(P)
        if per > 1:
            raise _infinite_meeting_time(P, detail=" (periodic chain)")

    op = PairOperator(P, "L_kill")
    rtol = utils.get_setting("MEETING", "KRYLOV_RTOL")
    maxiter = utils.get_setting("MEETING", "KRYLOV_MAXITER_FACTOR") * n

    w, info, residual = _krylov(op, b, rtol, maxiter)
    write_log("Matrix-free GMRES on n^2=%d: info=%d, relative residual "
              "%.3e"%(n * n, info, residual))

    if not np.all(np.isfinite(w)):
        raise _infinite_meeting_time(P, detail=" (non-finite iterate)")

    if info != 0 or residual > 10. * rtol:
        err_msg = "GMRES did not reach relative residual %.1e within %d " \
                  "iterations (residual %.3e)."%(rtol, maxiter, residual)
        write_log(err_msg, "error")
        raise ConvergenceError(residual, maxiter, err_msg)
    return w


def exact_meeting_times(P: TransitionMatrix,
                        solver: str = None) -> MeetingTimeMatrix:
    """Solve (I - (P⊗P)E) w = 1 and return the meeting-time matrix.

    `solver` is "dense" (LU with a condition estimate) or "krylov"
    (matrix-free GMRES); by default dense up to the dense threshold.
    """
    utils.check_type("P", P, TransitionMatrix)
    n = P.n
    if solver is None:
        solver = "dense" if n <= dense_threshold() else "krylov"

    b = np.ones(n * n)
    if solver == "dense":
        w = _dense_solve(P, b)
    elif solver == "krylov":
        w = _krylov_solve(P, b)
    else:
        err_msg = "solver=%s is not defined!"%(solver)
        write_log(err_msg, "error")
        raise InvalidParameterError("solver", solver, err_msg)

    return MeetingTimeMatrix.from_solution(w, n)


def _check_dims(n, pi: StationaryDistribution):
    if pi.n != n:
        err_msg = "pi has length %d but the chain has %d states."%(pi.n, n)
        write_log(err_msg, "error")
        raise DimensionError(n, pi.n, err_msg)


def tmeet_pi(M: MeetingTimeMatrix, pi: StationaryDistribution) -> float:
    """Sum over i != j of pi_i pi_j M[i, j]."""
    _check_dims(M.n, pi)
    return float(pi.pi @ M.M @ pi.pi)


def diagonal_identity(M: MeetingTimeMatrix,
                      pi: StationaryDistribution) -> float:
    """Sum of pi_i^2 raw[i, i]; equals 1 for the exact solution."""
    _check_dims(M.n, pi)
    return float(np.sum(pi.pi**2 * np.diag(M.raw)))


def recursion_residual(P: TransitionMatrix, M: MeetingTimeMatrix) -> float:
    """Max entry of |W - 1 1^t - P (W - W_d) P^t| for the raw solution W."""
    W = M.raw
    off = W - np.diag(np.diag(W))
    return float(np.max(np.abs(W - 1. - P.P @ off @ P.P.T)))


def _fix_signs(U, V):
    # First clearly nonzero coordinate of each u_i positive; v_i follows.
    U = U.copy()
    V = V.copy()
    for i in range(U.shape[1]):
        u = U[:, i]
        tol = 1e-12 * max(np.max(np.abs(u)), 1e-300)
        idx = np.flatnonzero(np.abs(u) > tol)
        if idx.size and u[idx[0]] < 0.:
            U[:, i] = -u
            V[:, i] = -V[:, i]
    # end of for
    return U, V


def _full_svd(op: PairOperator) -> SvdResult:
    A = materialize(op)
    try:
        U, sigma, Vt = scipy.linalg.svd(A, lapack_driver="gesvd")
    except np.linalg.LinAlgError as e:
        err_msg = "Dense SVD did not converge: %s"%(e)
        write_log(err_msg, "error")
        raise ConvergenceError(None, None, err_msg)
    U, V = _fix_signs(U, Vt.T)
    return SvdResult(sigma, U, V, partial=False)


class _InverseOperator(LinearOperator):
    """L^{-1} applied through inner GMRES solves on L and L^t."""

    def __init__(self, op: LinearOperator, rtol: float, maxiter: int):
        self._op = op
        self._op_t = op.H
        self._rtol = rtol
        self._maxiter = maxiter
        super().__init__(dtype=np.float64, shape=op.shape)

    def _solve(self, A, y):
        y = np.asarray(y, dtype=float).ravel()
        x, info, residual = _krylov(A, y, self._rtol, self._maxiter)
        # GMRES may stall just short of the inner target near roundoff.
        if not np.all(np.isfinite(x)) or residual > 1e3 * self._rtol:
            err_msg = "Inner solve failed in inverse iteration " \
                      "(residual %.3e)."%(residual)
            write_log(err_msg, "error")
            raise ConvergenceError(residual, self._maxiter, err_msg)
        return x

    def _matvec(self, y):
        return self._solve(self._op, y)

    def _rmatvec(self, y):
        return self._solve(self._op_t, y)


def smallest_triplets(op: LinearOperator, k: int, n: int):
    """k smallest singular triplets of an invertible pair operator.

    Lanczos bidiagonalisation (ARPACK) on the inverse: the smallest singular
    values of L are the reciprocals of the largest of L^{-1}, and the roles
    of left and right vectors swap. Each pair is polished through one
    application of L and checked against the residual tolerance.
    Returns (sigma ascending, U, V).
    """
    dim = op.shape[0]
    rtol = utils.get_setting("MEETING", "SVD_INNER_RTOL")
    res_tol = utils.get_setting("MEETING", "SVD_RESIDUAL_TOL")
    maxiter = utils.get_setting("MEETING", "KRYLOV_MAXITER_FACTOR") * n

    inverse = _InverseOperator(op, rtol, maxiter)
    v0 = utils.make_rng(0).standard_normal(dim)
    try:
        left, s, _ = svds(inverse, k=k, which="LM", v0=v0)
    except ArpackError as e:
        err_msg = "Partial SVD did not converge: %s"%(e)
        write_log(err_msg, "error")
        raise ConvergenceError(None, None, err_msg)

    order = np.argsort(-s, kind="stable")
    V = left[:, order]
    LV = op.matmat(V)
    sigma = np.linalg.norm(LV, axis=0)
    U = LV / sigma

    residual = np.max(np.linalg.norm(op.H.matmat(U) - V * sigma, axis=0))
    write_log("Partial SVD k=%d: max residual %.3e"%(k, residual), "debug")
    if residual > res_tol:
        err_msg = "Partial SVD residual %.3e exceeds %.1e."%(residual, res_tol)
        write_log(err_msg, "error")
        raise ConvergenceError(residual, None, err_msg)
    return sigma, U, V


def svd_killed(P: TransitionMatrix, k_smallest: int = None) -> SvdResult:
    """Singular triplets of L_kill; all of them, or the k smallest."""
    utils.check_type("P", P, TransitionMatrix)
    op = PairOperator(P, "L_kill")
    dim = P.n**2

    if k_smallest is None:
        return _full_svd(op)

    utils.check_positive_int("k_smallest", k_smallest)
    if k_smallest > dim:
        err_msg = "k_smallest=%d exceeds n^2=%d."%(k_smallest, dim)
        write_log(err_msg, "error")
        raise InvalidParameterError("k_smallest", k_smallest, err_msg)

    if k_smallest >= dim - 1:
        # ARPACK needs k < dim; fall back to the dense route.
        full = _full_svd(op)
        return SvdResult(full.sigma[-k_smallest:],
                         full.U[:, -k_smallest:],
                         full.V[:, -k_smallest:],
                         partial=k_smallest < dim)

    sigma, U, V = smallest_triplets(op, k_smallest, P.n)
    # Non-increasing storage order: largest of the held ones first.
    order = np.arange(k_smallest)[::-1]
    U, V = _fix_signs(U[:, order], V[:, order])
    return SvdResult(sigma[order], U, V, partial=True)


def _zero_tol(svd: SvdResult):
    return utils.get_setting("MEETING", "ZERO_SIGMA_TOL")


def _spectral_terms(svd: SvdResult, pi: StationaryDistribution, cols):
    pipi = pi.pair_vector()
    a = svd.V[:, cols].T @ pipi
    b = svd.U[:, cols].sum(axis=0)
    return a * b


def spectral_tmeet(svd: SvdResult, pi: StationaryDistribution) -> float:
    """-1 + sum_i (1/sigma_i) ((pi⊗pi)^t v_i)(u_i^t 1) over all triplets."""
    utils.check_type("svd", svd, SvdResult)
    _check_dims(svd.n, pi)

    if svd.partial:
        err_msg = "The spectral formula needs all n^2 triplets; " \
                  "only %d are held."%(svd.num_held)
        write_log(err_msg, "error")
        raise InsufficientDataError(err_msg)

    if np.any(svd.sigma <= _zero_tol(svd)):
        err_msg = "L_kill has a zero singular value; " \
                  "the meeting time is infinite."
        write_log(err_msg, "error")
        raise InfiniteMeetingTimeError(rcond=0., message=err_msg)

    terms = _spectral_terms(svd, pi, slice(None))
    return float(-1. + np.sum(terms / svd.sigma))


def rank_k_tmeet(svd: SvdResult,
                 pi: StationaryDistribution,
                 k: int) -> RankKApprox:
    """Truncate the spectral sum to the k smallest triplets.

    The error bound n ||pi||^2 / sigma_{n^2-k} is 0 at k = n^2, where the
    truncation is the full sum.
    """
    utils.check_type("svd", svd, SvdResult)
    utils.check_positive_int("k", k)
    _check_dims(svd.n, pi)

    dim = svd.dim
    if k > dim:
        err_msg = "k=%d exceeds n^2=%d."%(k, dim)
        write_log(err_msg, "error")
        raise InvalidParameterError("k", k, err_msg)

    need = k if k == dim else k + 1
    if svd.num_held < need:
        err_msg = "Rank-%d approximation needs the %d smallest triplets, " \
                  "only %d are held."%(k, need, svd.num_held)
        write_log(err_msg, "error")
        raise InsufficientDataError(err_msg)

    cols = slice(svd.num_held - k, svd.num_held)
    sig = svd.sigma[cols]
    if np.any(sig <= _zero_tol(svd)):
        err_msg = "A zero singular value lies among the %d smallest; " \
                  "the meeting time is infinite."%(k)
        write_log(err_msg, "error")
        raise InfiniteMeetingTimeError(rcond=0., message=err_msg)

    value = float(-1. + np.sum(_spectral_terms(svd, pi, cols) / sig))

    if k == dim:
        bound = 0.
    else:
        sigma_next = svd.triplet(dim - k)[0]
        if sigma_next <= _zero_tol(svd):
            bound = math.inf
        else:
            bound = svd.n * pi.sq_norm / sigma_next

    return RankKApprox(k=k,
                       value=value,
                       bound=float(bound),
                       certified=bool(np.isfinite(bound)))
