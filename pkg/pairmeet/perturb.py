r"""Perturbation analysis of L_kill around L = I - P ⊗ P.

L_kill = L - D with D = (P ⊗ P)(E - I). The last singular pair of L is
known in closed form,

    u_last = (pi ⊗ pi) / ||pi||^2,    v_last = 1 / n,    sigma = 0,

and in the basis [u_last, U2] x [v_last, V2] the perturbation D has blocks
gamma11, g12, g21 and G22. L_kill^t L_kill = L^t L + Delta; with y = D v_last
the blocks of Delta reduce to

    Delta11 = ||y||^2,    ||Delta12|| = ||(I - v v^t) L_kill^t y||,

and Delta22 is the compression of L_kill^t L_kill - L^t L onto v_last's
orthogonal complement. None of these needs U2 or V2, so every quantity below
is computed with matrix-free pair operators; the dense SVD is only used for
sigma values when n is small.
"""
from __future__ import annotations
from dataclasses import dataclass
from dataclasses import asdict
import math

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator
from scipy.sparse.linalg import svds
from scipy.sparse.linalg import eigsh
from scipy.sparse.linalg import ArpackError

from pairmeet import utils
from pairmeet.graphs import Graph
from pairmeet.graphs import degree_stats
from pairmeet.graphs import codegree_stats
from pairmeet.markov import TransitionMatrix
from pairmeet.markov import StationaryDistribution
from pairmeet.pairspace import PairOperator
from pairmeet.pairspace import materialize
from pairmeet.pairspace import dense_threshold
from pairmeet.meeting import SvdResult
from pairmeet.meeting import svd_killed
from pairmeet.meeting import smallest_triplets
from pairmeet.meeting import exact_meeting_times
from pairmeet.meeting import tmeet_pi
from pairmeet.meeting import rank_k_tmeet
from pairmeet.logging import write_log
from pairmeet.exception import ConvergenceError
from pairmeet.exception import DimensionError
from pairmeet.exception import InconsistencyError
from pairmeet.exception import InsufficientDataError
from pairmeet.exception import InvalidParameterError
from pairmeet.exception import RecoveryError
from pairmeet.exception import InfiniteMeetingTimeError

# The unperturbed L^t L is block diagonal in the singular basis.
B12_NORM = 0.


class _BatchOperator(LinearOperator):
    """Operator on the pair space given by batched column functions."""

    def __init__(self, dim, forward, backward=None):
        self._forward = forward
        self._backward = forward if backward is None else backward
        super().__init__(dtype=np.float64, shape=(dim, dim))

    def _matmat(self, X):
        return self._forward(np.asarray(X, dtype=float))

    def _rmatmat(self, X):
        return self._backward(np.asarray(X, dtype=float))

    def _matvec(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        return self._matmat(x).ravel()

    def _rmatvec(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        return self._rmatmat(x).ravel()


def _project_out(w, X):
    # (I - w w^t) X for a unit vector w and a column batch X.
    return X - np.multiply.outer(w, w @ X)


def _checked(what: str, fn, *args, **kwargs):
    """Call an ARPACK or LAPACK routine; failures become ConvergenceError."""
    try:
        return fn(*args, **kwargs)
    except (ArpackError, np.linalg.LinAlgError) as e:
        err_msg = "%s failed: %s"%(what, e)
        write_log(err_msg, "error")
        raise ConvergenceError(None, None, err_msg)


class UnperturbedSvd:
    """Singular data of L = I - P ⊗ P with the closed-form last pair.

    In dense mode all n^2 singular values and the bases U2, V2 are kept.
    Otherwise only sigma_max and sigma_{n^2-1} are computed and U2, V2 are
    None.
    """

    def __init__(self,
                 n: int,
                 u_last,
                 v_last,
                 sigma_max: float,
                 sigma_second_last: float,
                 sigma=None,
                 U2=None,
                 V2=None):
        self._n = n
        self._u_last = np.asarray(u_last, dtype=float)
        self._v_last = np.asarray(v_last, dtype=float)
        self._sigma_max = float(sigma_max)
        self._sigma_second_last = float(sigma_second_last)
        self._sigma = sigma
        self._U2 = U2
        self._V2 = V2

    def __str__(self):
        return "%s(n=%d, dense=%s)"%(self.__class__.__name__,
                                     self._n,
                                     self.dense)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._n

    @property
    def dense(self) -> bool:
        return self._sigma is not None

    @property
    def sigma(self):
        return self._sigma

    @property
    def U2(self):
        return self._U2

    @property
    def V2(self):
        return self._V2

    @property
    def u_last(self) -> np.ndarray:
        return self._u_last

    @property
    def v_last(self) -> np.ndarray:
        return self._v_last

    @property
    def sigma_max(self) -> float:
        """||Sigma2||, the largest singular value of L."""
        return self._sigma_max

    @property
    def sigma_second_last(self) -> float:
        """sigma_min(Sigma2), the second-smallest singular value of L."""
        return self._sigma_second_last

    @property
    def sep(self) -> float:
        return self._sigma_second_last**2


def closed_form_last_pair(pi: StationaryDistribution):
    n = pi.n
    u_last = pi.pair_vector() / pi.sq_norm
    v_last = np.full(n * n, 1. / n)
    return u_last, v_last


def _check_pi(P: TransitionMatrix, pi: StationaryDistribution):
    if pi.n != P.n:
        err_msg = "pi has length %d but the chain has %d states."%(pi.n, P.n)
        write_log(err_msg, "error")
        raise DimensionError(P.n, pi.n, err_msg)


def _inconsistent(mismatch, what):
    err_msg = "%s deviates from its closed form by %.3e; P may be reducible " \
              "or pi not stationary."%(what, mismatch)
    write_log(err_msg, "error")
    return InconsistencyError(mismatch, err_msg)


class _DeflatedOperator(LinearOperator):
    """L + c u_last v_last^t: the null direction lifted to singular value c."""

    def __init__(self, op: PairOperator, u, v, c=2.):
        self._op = op
        self._u = u
        self._v = v
        self._c = c
        super().__init__(dtype=np.float64, shape=op.shape)

    def _matmat(self, X):
        return self._op.matmat(X) + self._c * np.multiply.outer(self._u,
                                                                self._v @ X)

    def _rmatmat(self, X):
        return self._op.rmatmat(X) + self._c * np.multiply.outer(self._v,
                                                                 self._u @ X)

    def _matvec(self, x):
        return self._matmat(np.asarray(x, dtype=float).reshape(-1, 1)).ravel()

    def _rmatvec(self, x):
        return self._rmatmat(np.asarray(x, dtype=float).reshape(-1, 1)).ravel()


def unperturbed_svd(P: TransitionMatrix,
                    pi: StationaryDistribution,
                    dense: bool = None) -> UnperturbedSvd:
    """SVD of L with the last triplet replaced by its closed form.

    The closed-form pair must satisfy L v_last = 0 and L^t u_last = 0; in
    dense mode the numerical smallest singular value must vanish and, when
    the null space is one-dimensional, the numerical last vectors must
    match the closed forms up to sign.
    """
    utils.check_type("P", P, TransitionMatrix)
    utils.check_type("pi", pi, StationaryDistribution)
    _check_pi(P, pi)

    n = P.n
    tol = utils.get_setting("PERTURB", "CLOSED_FORM_TOL")
    op = PairOperator(P, "L")
    u_last, v_last = closed_form_last_pair(pi)

    mismatch = max(np.linalg.norm(op.matvec(v_last)),
                   np.linalg.norm(op.rmatvec(u_last)))
    if mismatch > tol:
        raise _inconsistent(mismatch, "The null pair of L")

    if dense is None:
        dense = n <= dense_threshold()

    if dense:
        A = materialize(op)
        U, sigma, Vt = _checked("SVD of L", scipy.linalg.svd, A,
                                lapack_driver="gesvd")
        if sigma[-1] > tol:
            raise _inconsistent(sigma[-1], "sigma_{n^2} of L")

        if sigma[-2] > tol:
            # Simple null space: the numerical last pair is determined.
            for name, num, cf in (("u_last", U[:, -1], u_last),
                                  ("v_last", Vt[-1], v_last)):
                diff = min(np.linalg.norm(num - cf), np.linalg.norm(num + cf))
                if diff > tol:
                    raise _inconsistent(diff, name)
            # end of for

        sigma = sigma.copy()
        sigma[-1] = 0.
        return UnperturbedSvd(n,
                              u_last,
                              v_last,
                              sigma_max=sigma[0],
                              sigma_second_last=sigma[-2],
                              sigma=sigma,
                              U2=U[:, :-1],
                              V2=Vt[:-1].T)

    v0 = utils.make_rng(1).standard_normal(n * n)
    sigma_max = _checked("sigma_max of L", svds, op, k=1, which="LM", v0=v0,
                         return_singular_vectors=False)
    deflated = _DeflatedOperator(op, u_last, v_last)
    sigma_low, _, _ = smallest_triplets(deflated, 1, n)
    write_log("Unperturbed L on n=%d: sigma_max=%.6g, sigma_{n^2-1}=%.6g"%(
        n, sigma_max[0], sigma_low[0]))
    return UnperturbedSvd(n,
                          u_last,
                          v_last,
                          sigma_max=sigma_max[0],
                          sigma_second_last=sigma_low[0])


def gamma11(P: TransitionMatrix, pi: StationaryDistribution) -> float:
    """u_last^t (P⊗P)(E-I) v_last; equals -1/n for every stochastic P."""
    utils.check_type("P", P, TransitionMatrix)
    utils.check_type("pi", pi, StationaryDistribution)
    _check_pi(P, pi)
    n = P.n
    y = PairOperator(P, "perturbation").matvec(np.ones(n * n))
    return float(pi.pair_vector() @ y / (pi.sq_norm * n))


def tilde_gamma11_sq(P: TransitionMatrix) -> float:
    """||(P⊗P)(E-I) 1||^2 / n^2 = gamma11^2 + ||g21||^2."""
    utils.check_type("P", P, TransitionMatrix)
    n = P.n
    y = PairOperator(P, "perturbation").matvec(np.ones(n * n))
    return float(y @ y) / n**2


def g12_sq_closed_form(pi: StationaryDistribution) -> float:
    """||g12||^2 = sum(pi^4) / ||pi||^4 - 1/n^2."""
    utils.check_type("pi", pi, StationaryDistribution)
    return float(np.sum(pi.pi**4) / pi.sq_norm**2 - 1. / pi.n**2)


def tilde_gamma11_sq_upper(R1: float, R2: float, d: float, n: int) -> float:
    """Upper bound on n^2 tilde_gamma11^2 from the degree statistics."""
    if R1 >= 1.:
        return math.inf
    return ((n - 1) / n * (1. + R2)**2 + n * (1. + R1)**2 / d**2) \
        / (1. - R1)**4


def perturbation_norm_bounds(R1: float, R2: float, d: float, n: int):
    """(lower, upper) bounds on ||(P⊗P)(E-I)||^2 for a simple random walk.

    Both come from the Gram matrix S[i, k] = ((A^t A)[i, k])^2 of the
    adjacency: Gershgorin for the upper bound, the uniform test vector for
    the lower one.
    """
    utils.check_positive_float("d", float(d))
    utils.check_positive_int("n", n)

    def _form(r1, r2, denom):
        return (r1**2 / d**2 + r2**2 / n - r2**2 / n**2) / denom

    if R1 >= 1.:
        upper = math.inf
    else:
        upper = _form(1. + R1, 1. + R2, (1. - R1)**4)
    lower = _form(max(0., 1. - R1), max(0., 1. - R2), (1. + R1)**4)
    return lower, upper


def perturbation_norm(P: TransitionMatrix, method: str = "power") -> float:
    """Largest singular value of (P⊗P)(E-I).

    "power" runs power iteration on D^t D with the matrix-free operator.
    "gram" uses that D only acts on the n diagonal pairs, whose images
    (P e_i) ⊗ (P e_i) have Gram matrix ((P^t P)[i, k])^2.
    """
    utils.check_type("P", P, TransitionMatrix)
    n = P.n

    if method == "gram":
        S = (P.P.T @ P.P)**2
        top = _checked("Gram eigenvalues", scipy.linalg.eigvalsh, S)[-1]
        return float(math.sqrt(max(top, 0.)))
    elif method != "power":
        err_msg = "method=%s is not defined!"%(method)
        write_log(err_msg, "error")
        raise InvalidParameterError("method", method, err_msg)

    tol = utils.get_setting("PERTURB", "POWER_TOL")
    maxiter = utils.get_setting("PERTURB", "POWER_MAXITER")
    op = PairOperator(P, "perturbation")

    x = np.zeros(n * n)
    x[::n + 1] = 1.
    x /= np.linalg.norm(x)
    lam = 0.
    for it in range(1, maxiter + 1):
        y = op.rmatvec(op.matvec(x))
        lam_new = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.:
            return 0.
        x = y / nrm
        if abs(lam_new - lam) <= tol * lam_new:
            write_log("Perturbation norm converged in %d iterations"%(it),
                      "debug")
            return math.sqrt(lam_new)
        lam = lam_new
    # end of for

    err_msg = "Power iteration for ||(P⊗P)(E-I)|| did not converge in %d " \
              "iterations."%(maxiter)
    write_log(err_msg, "error")
    raise ConvergenceError(abs(lam_new - lam), maxiter, err_msg)


@dataclass(frozen=True)
class StewartBlocks:
    """Block quantities of the perturbation of L^t L (and of L L^t).

    g12 and g21 are held as pair-space vectors V2 g12 and U2 g21, whose
    norms equal those of the block vectors. Quantities with a `_bound`
    suffix are the submultiplicative estimates; `exact` tells which of the
    two routes feeds delta and the condition value.
    """
    n: int
    pi_sq_norm: float
    gamma11: float
    g12: np.ndarray
    g21: np.ndarray
    g12_sq: float
    g21_sq: float
    G22_norm: float
    G22_norm_bound: float
    Sigma2_norm: float
    Sigma2_inv_sq_norm_inv: float
    tilde_gamma11_sq: float
    delta11: float
    delta12: float
    delta21: float
    delta22: float
    delta12_bound: float
    delta22_bound: float
    delta: float
    condition_value: float
    w_delta11: float
    w_delta12: float
    w_delta22: float
    delta_w: float
    exact: bool

    @property
    def sep(self) -> float:
        return self.Sigma2_inv_sq_norm_inv

    @property
    def B12_norm(self) -> float:
        return B12_NORM

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("g12")
        out.pop("g21")
        return out


def _norm_sym(op: LinearOperator, dense: bool) -> float:
    if dense:
        A = op.matmat(np.eye(op.shape[1]))
        vals = _checked("Symmetric norm", scipy.linalg.eigvalsh,
                        0.5 * (A + A.T))
        return float(np.max(np.abs(vals)))
    vals = _checked("Symmetric norm", eigsh, op, k=1, which="LM",
                    return_eigenvectors=False)
    return float(abs(vals[0]))


def _norm_general(op: LinearOperator, dense: bool) -> float:
    if dense:
        A = op.matmat(np.eye(op.shape[1]))
        return float(_checked("Operator norm", scipy.linalg.svdvals, A)[0])
    vals = _checked("Operator norm", svds, op, k=1, which="LM",
                    return_singular_vectors=False)
    return float(vals[0])


def stewart_blocks(P: TransitionMatrix,
                   pi: StationaryDistribution,
                   svd: UnperturbedSvd,
                   exact: bool = True) -> StewartBlocks:
    """Perturbation blocks, separation, delta and the applicability value.

    delta = sep - ||Delta11|| - ||Delta22|| and the condition value is
    4 ||Delta21|| (||B12|| + ||Delta12||) / delta^2 with B12 = 0. A
    nonpositive delta yields an infinite condition value.
    """
    utils.check_type("svd", svd, UnperturbedSvd)
    _check_pi(P, pi)
    if svd.n != P.n:
        err_msg = "svd is for n=%d but P has n=%d."%(svd.n, P.n)
        write_log(err_msg, "error")
        raise DimensionError(P.n, svd.n, err_msg)

    n = P.n
    dim = n * n
    dense = svd.dense
    u, v = svd.u_last, svd.v_last
    L = PairOperator(P, "L")
    K = PairOperator(P, "L_kill")
    D = PairOperator(P, "perturbation")

    y = D.matvec(v)
    z = D.rmatvec(u)
    g11 = float(u @ y)
    g21 = y - g11 * u
    g12 = z - g11 * v
    g21_sq = float(g21 @ g21)
    g12_sq = float(g12 @ g12)
    tg_sq = float(y @ y)

    Sigma2 = svd.sigma_max
    sep = svd.sep
    D_norm = perturbation_norm(P)

    delta11 = tg_sq
    delta12 = float(np.linalg.norm(_project_out(v, K.rmatvec(y))))
    w_delta11 = float(z @ z)
    w_delta12 = float(np.linalg.norm(_project_out(u, K.matvec(z))))

    G22_bound = D_norm
    delta12_bound = math.sqrt(g21_sq) * Sigma2 + abs(g11) * math.sqrt(g12_sq) \
        + math.sqrt(g21_sq) * G22_bound
    delta22_bound = 2. * G22_bound * Sigma2 + G22_bound**2 + g12_sq

    if exact:
        G22 = _BatchOperator(dim,
                             lambda X: _project_out(u, D.matmat(
                                 _project_out(v, X))),
                             lambda X: _project_out(v, D.rmatmat(
                                 _project_out(u, X))))
        G22_norm = _norm_general(G22, dense)

        def _right(X):
            Xp = _project_out(v, X)
            gram = K.rmatmat(K.matmat(Xp)) - L.rmatmat(L.matmat(Xp))
            return _project_out(v, gram)

        def _left(X):
            Xp = _project_out(u, X)
            gram = K.matmat(K.rmatmat(Xp)) - L.matmat(L.rmatmat(Xp))
            return _project_out(u, gram)

        delta22 = _norm_sym(_BatchOperator(dim, _right), dense)
        w_delta22 = _norm_sym(_BatchOperator(dim, _left), dense)
        used12, used22 = delta12, delta22
    else:
        G22_norm = G22_bound
        delta22 = delta22_bound
        # The left-side Delta22 has g21 g21^t in place of g12 g12^t.
        w_delta22 = 2. * G22_bound * Sigma2 + G22_bound**2 + g21_sq
        used12, used22 = delta12_bound, delta22_bound

    delta = sep - delta11 - used22
    delta_w = sep - w_delta11 - w_delta22
    if delta > 0.:
        condition = 4. * used12 * (B12_NORM + used12) / delta**2
    else:
        condition = math.inf

    write_log("Stewart blocks n=%d: gamma11=%.6g, sep=%.6g, delta=%.6g, "
              "condition=%.6g"%(n, g11, sep, delta, condition), "debug")

    return StewartBlocks(n=n,
                         pi_sq_norm=pi.sq_norm,
                         gamma11=g11,
                         g12=g12,
                         g21=g21,
                         g12_sq=g12_sq,
                         g21_sq=g21_sq,
                         G22_norm=G22_norm,
                         G22_norm_bound=G22_bound,
                         Sigma2_norm=Sigma2,
                         Sigma2_inv_sq_norm_inv=sep,
                         tilde_gamma11_sq=tg_sq,
                         delta11=delta11,
                         delta12=used12,
                         delta21=used12,
                         delta22=used22,
                         delta12_bound=delta12_bound,
                         delta22_bound=delta22_bound,
                         delta=delta,
                         condition_value=condition,
                         w_delta11=w_delta11,
                         w_delta12=w_delta12,
                         w_delta22=w_delta22,
                         delta_w=delta_w,
                         exact=exact)


@dataclass(frozen=True)
class SigmaBounds:
    lower_sq: float
    upper_sq: float
    certified: bool
    q_norm_bound: float
    w_norm_bound: float
    inv_n_sigma_lower: float
    inv_n_sigma_upper: float
    unperturbed_projector: float
    projector_lower: float
    projector_upper: float

    def contains(self, sigma_sq: float, rtol: float = 1e-10) -> bool:
        slack = rtol * max(abs(sigma_sq), 1.)
        return self.lower_sq - slack <= sigma_sq <= self.upper_sq + slack

    def to_dict(self) -> dict:
        return asdict(self)


def w_norm_asymptotic(epsilon1: float, n: int) -> float:
    """8 (1 + eps1)^2 / ((1 - 5 eps1) sqrt(n)); infinite for eps1 >= 1/5."""
    if epsilon1 >= 0.2:
        return math.inf
    return 8. * (1. + epsilon1)**2 / ((1. - 5. * epsilon1) * math.sqrt(n))


def sigma_min_bounds(blocks: StewartBlocks) -> SigmaBounds:
    utils.check_type("blocks", blocks, StewartBlocks)
    n = blocks.n
    delta = blocks.delta
    tg_sq = blocks.tilde_gamma11_sq

    if delta > 0.:
        spread = 2. * blocks.delta12**2 / delta
        lower_sq = max(tg_sq - spread, 0.)
        upper_sq = tg_sq + spread
        q_bound = 2. * blocks.delta21 / delta
    else:
        lower_sq, upper_sq, q_bound = 0., math.inf, math.inf

    certified = bool(delta > 0. and blocks.condition_value <= 1.)

    if blocks.delta_w > 0. and \
            4. * blocks.w_delta12**2 / blocks.delta_w**2 <= 1.:
        w_bound = 2. * blocks.w_delta12 / blocks.delta_w
    else:
        w_bound = math.inf

    inv_lower = 1. / (n * math.sqrt(upper_sq)) if upper_sq > 0. else math.inf
    inv_upper = 1. / (n * math.sqrt(lower_sq)) if lower_sq > 0. else math.inf

    n_pi = n * blocks.pi_sq_norm
    unpert = 1. / n_pi
    if math.isfinite(q_bound) and math.isfinite(w_bound):
        proj_lower = (unpert - w_bound - q_bound - n_pi * w_bound * q_bound) \
            / math.sqrt((1. + q_bound**2) * (1. + w_bound**2))
    else:
        proj_lower = -math.inf

    return SigmaBounds(lower_sq=lower_sq,
                       upper_sq=upper_sq,
                       certified=certified,
                       q_norm_bound=q_bound,
                       w_norm_bound=w_bound,
                       inv_n_sigma_lower=inv_lower,
                       inv_n_sigma_upper=inv_upper,
                       unperturbed_projector=unpert,
                       projector_lower=proj_lower,
                       projector_upper=n_pi)


def nu_from_eps(epsilon1: float):
    """nu1 = nu2 = ((eps1 + 1)^(1/4) - 1) / ((eps1 + 1)^(1/4) + 1)."""
    utils.check_positive_float("epsilon1", epsilon1)
    root = (epsilon1 + 1.)**0.25
    nu = (root - 1.) / (root + 1.)
    return nu, nu


def norm_estimate_report(P: TransitionMatrix,
                         pi: StationaryDistribution,
                         blocks: StewartBlocks,
                         d: float,
                         epsilon1: float) -> dict:
    """Check the finite-n norm estimates at a given eps1."""
    utils.check_type("blocks", blocks, StewartBlocks)
    utils.check_positive_float("epsilon1", epsilon1)
    _check_pi(P, pi)

    n = P.n
    e = epsilon1
    checks = [
        ("Sigma2_norm", blocks.Sigma2_norm, "<=", 2. + e),
        ("n_g12_sq", n * blocks.g12_sq, "<=", 1. + e),
        ("n_pi_sq_norm", n * pi.sq_norm, "<=", 1. + e),
        ("sqrt_n_G22_norm", math.sqrt(n) * blocks.G22_norm, "<=", 1. + e),
        ("n2_g21_sq", n**2 * blocks.g21_sq, "<=", (1. + e)**2 - 1.),
        ("sep_lower", blocks.sep, ">=", (1. - e)**2),
        ("sep_upper", blocks.sep, "<=", (1. + e)**2),
    ]

    rows = []
    for name, value, op, bound in checks:
        passed = value <= bound if op == "<=" else value >= bound
        rows.append({"name": name,
                     "value": float(value),
                     "relation": op,
                     "bound": float(bound),
                     "passed": bool(passed)})
    # end of for

    nu1, nu2 = nu_from_eps(epsilon1)
    return {"epsilon1": epsilon1,
            "nu1": nu1,
            "nu2": nu2,
            "n_over_d_sq": n / d**2 if d > 0 else math.inf,
            "checks": rows,
            "all_passed": all(row["passed"] for row in rows)}


@dataclass(frozen=True)
class RecoveryDiagnostics:
    q_norm: float
    w_norm: float
    q_norm_bound: float
    w_norm_bound: float
    projector: float

    @property
    def projector_deviation(self) -> float:
        return abs(self.projector - 1.)

    @property
    def q_within(self) -> bool:
        return self.q_norm <= self.q_norm_bound * (1. + 1e-9)

    @property
    def w_within(self) -> bool:
        return self.w_norm <= self.w_norm_bound * (1. + 1e-9)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["q_within"] = self.q_within
        out["projector_deviation"] = self.projector_deviation
        out["w_within"] = self.w_within
        return out


def _tan_angle(cos):
    cos = min(cos, 1.)
    return math.sqrt(max(1. - cos**2, 0.)) / cos


def recover_Q(svd_unpert: UnperturbedSvd,
              svd_kill: SvdResult,
              pi: StationaryDistribution,
              bounds: SigmaBounds = None) -> RecoveryDiagnostics:
    """Measure ||Q|| and ||W|| from the least perturbed singular pair.

    With v~ = (v_last + V2 Q)(1 + ||Q||^2)^(-1/2), ||Q|| is the tangent of
    the angle between v~ and v_last; ||W|| likewise from u~ and u_last.
    """
    utils.check_type("svd_unpert", svd_unpert, UnperturbedSvd)
    utils.check_type("svd_kill", svd_kill, SvdResult)
    if svd_kill.n != svd_unpert.n:
        err_msg = "SVDs are for different sizes (%d, %d)."%(svd_unpert.n,
                                                             svd_kill.n)
        write_log(err_msg, "error")
        raise DimensionError(svd_unpert.n, svd_kill.n, err_msg)

    _, u_t, v_t = svd_kill.triplet(svd_kill.dim)
    cos_u = float(u_t @ svd_unpert.u_last)
    if cos_u < 0.:
        u_t, v_t, cos_u = -u_t, -v_t, -cos_u
    cos_v = float(v_t @ svd_unpert.v_last)

    for name, cos in (("v", cos_v), ("u", cos_u)):
        if cos <= 0.:
            angle = math.degrees(math.acos(max(min(cos, 1.), -1.)))
            err_msg = "The perturbed %s vector is at %.1f degrees from the " \
                      "unperturbed one."%(name, angle)
            write_log(err_msg, "error")
            raise RecoveryError(angle, err_msg)
    # end of for

    projector = float((pi.pair_vector() @ v_t) * u_t.sum())
    return RecoveryDiagnostics(
        q_norm=_tan_angle(cos_v),
        w_norm=_tan_angle(cos_u),
        q_norm_bound=math.inf if bounds is None else bounds.q_norm_bound,
        w_norm_bound=math.inf if bounds is None else bounds.w_norm_bound,
        projector=projector)


def naive_tmeet(n: int) -> float:
    """1 / |gamma11| = n, the leading-order meeting time."""
    return float(n)


def rank1_proxy(P: TransitionMatrix,
                pi: StationaryDistribution,
                svd_kill: SvdResult) -> dict:
    """The least triplet of L_kill alone as a meeting-time estimate.

    (pi⊗pi)^t v~ u~^t 1 / (n sigma~_{n^2}) should be within
    ||pi||^2 / sigma~_{n^2-1} + 1/n of t_meet^pi / n. Needs the two
    smallest triplets; the exact value comes from the linear solve.
    """
    utils.check_type("svd_kill", svd_kill, SvdResult)
    n = P.n
    approx = rank_k_tmeet(svd_kill, pi, 1)
    exact = tmeet_pi(exact_meeting_times(P), pi)

    proxy = (approx.value + 1.) / n
    error = abs(proxy - exact / n)
    bound = approx.bound / n + 1. / n
    return {"tmeet_rank1": approx.value,
            "proxy_over_n": proxy,
            "tmeet_over_n": exact / n,
            "error": error,
            "error_bound": bound,
            "within": bool(error <= bound * (1. + 1e-9))}


def perturbation_report(P: TransitionMatrix,
                        pi: StationaryDistribution,
                        graph: Graph = None,
                        d: float = None,
                        epsilon1: float = None,
                        exact: bool = True) -> dict:
    """Every perturbation quantity for one chain, JSON-ready.

    Graph statistics, the norm bounds and the norm-estimate checks are
    included when `graph` and `d` are given. The measured least singular
    value of L_kill, the Q/W recovery and the rank-1 proxy come from the
    dense SVD up to the dense threshold and from the two smallest
    triplets above it.
    """
    utils.check_type("P", P, TransitionMatrix)
    utils.check_type("pi", pi, StationaryDistribution)
    n = P.n

    usvd = unperturbed_svd(P, pi)
    blocks = stewart_blocks(P, pi, usvd, exact=exact)
    bounds = sigma_min_bounds(blocks)
    D_norm = blocks.G22_norm_bound

    report = {"n": n,
              "gamma11": blocks.gamma11,
              "naive_tmeet": naive_tmeet(n),
              "tilde_gamma11_sq": blocks.tilde_gamma11_sq,
              "tilde_gamma11_sq_closed_form": tilde_gamma11_sq(P),
              "g12_sq_closed_form": g12_sq_closed_form(pi),
              "perturbation_norm": D_norm,
              "delta": blocks.delta,
              "condition_value": blocks.condition_value,
              "certified": bounds.certified,
              "blocks": blocks.to_dict(),
              "bounds": bounds.to_dict()}

    if graph is not None and d is not None:
        R1 = degree_stats(graph, d).R1
        R2 = codegree_stats(graph, d).R2
        lower, upper = perturbation_norm_bounds(R1, R2, d, n)
        report["R1"] = R1
        report["R2"] = R2
        report["perturbation_norm_sq_bounds"] = [lower, upper]
        report["n2_tilde_gamma11_sq_upper"] = \
            tilde_gamma11_sq_upper(R1, R2, d, n)
        if epsilon1 is not None:
            report["norm_estimates"] = norm_estimate_report(P,
                                                            pi,
                                                            blocks,
                                                            d,
                                                            epsilon1)
            report["w_norm_asymptotic"] = w_norm_asymptotic(epsilon1, n)

    try:
        if n <= dense_threshold():
            kill = svd_killed(P)
        else:
            # sigma~_{n^2} and sigma~_{n^2-1} with their vectors suffice.
            kill = svd_killed(P, k_smallest=2)
    except (ConvergenceError, InfiniteMeetingTimeError) as e:
        report["sigma_min_error"] = e.message
        return report

    sigma_min = float(kill.sigma[-1])
    report["sigma_min_sq"] = sigma_min**2
    report["sigma_min_in_bounds"] = bounds.contains(sigma_min**2)
    try:
        recovery = recover_Q(usvd, kill, pi, bounds)
        report["recovery"] = recovery.to_dict()
    except (RecoveryError, InsufficientDataError,
            InfiniteMeetingTimeError) as e:
        report["recovery"] = {"error": e.message}

    try:
        report["rank1"] = rank1_proxy(P, pi, kill)
    except (ConvergenceError, InsufficientDataError,
            InfiniteMeetingTimeError) as e:
        report["rank1"] = {"error": e.message}
    return report
