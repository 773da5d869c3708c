r"""Pair-space machinery for two walkers on n states.

A pair state (k, l) is identified with the coordinate f(k, l) = (k-1)n + l
of a length n^2 vector (1-based, as in the public API). Internally a vector
x is the row-major flattening of the n x n matrix X with X[k-1, l-1] =
x[f(k, l) - 1], so that

    (P ⊗ P) x  <->  P X P^t        and        (P ⊗ P)^t x  <->  P^t X P,

and P ⊗ P is never materialised: each application costs O(n^3) time and
O(n^2) memory.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator

from pairmeet import utils
from pairmeet.markov import TransitionMatrix
from pairmeet.logging import write_log
from pairmeet.exception import DimensionError
from pairmeet.exception import PairIndexError
from pairmeet.exception import DenseSizeError
from pairmeet.exception import InvalidParameterError


class PairIndex:

    def __init__(self, n: int):
        utils.check_positive_int("n", n)
        self._n = n

    def __str__(self):
        return "%s(n=%d)"%(self.__class__.__name__, self._n)

    def __repr__(self):
        return str(self)

    @property
    def n(self) -> int:
        return self._n

    @property
    def size(self) -> int:
        return self._n * self._n

    def flatten(self, k: int, l: int) -> int:
        n = self._n
        for name, val in (("k", k), ("l", l)):
            if not 1 <= val <= n:
                err_msg = "%s=%d is out of range [1, %d]."%(name, val, n)
                write_log(err_msg, "error")
                raise PairIndexError(val, n, err_msg)
        return (k - 1) * n + l

    def unflatten(self, index: int):
        n = self._n
        if not 1 <= index <= n * n:
            err_msg = "index=%d is out of range [1, %d]."%(index, n * n)
            write_log(err_msg, "error")
            raise PairIndexError(index, n, err_msg)
        k, l = divmod(index - 1, n)
        return k + 1, l + 1

    def diagonal(self) -> np.ndarray:
        """The meeting set D = {1, n+2, 2n+3, ..., n^2} (1-based)."""
        return np.arange(self._n) * (self._n + 1) + 1


def flatten(k: int, l: int, n: int) -> int:
    return PairIndex(n).flatten(k, l)


def _check_length(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n * n:
        err_msg = "Pair-space vector should have length %d, " \
                  "not shape %s."%(n * n, str(x.shape))
        write_log(err_msg, "error")
        raise DimensionError(n * n, x.shape, err_msg)
    return x


def _kill(X, n):
    # Zero the diagonal pairs of a batch of flattened vectors (rows of X).
    X[..., ::n + 1] = 0.
    return X


def apply_E(x, n: int = None) -> np.ndarray:
    """Zero the coordinates in D, leaving all others unchanged."""
    x = np.asarray(x, dtype=float)
    if n is None:
        n = int(round(np.sqrt(x.shape[0]))) if x.ndim == 1 else 0
    x = _check_length(x, n)
    return _kill(x.copy(), n)


def _kron_batch(P, X):
    # X: (b, n, n) -> P X P^t for every slice.
    return np.matmul(np.matmul(P, X), P.T)


def _kron_t_batch(P, X):
    return np.matmul(np.matmul(P.T, X), P)


def apply_kron(P: TransitionMatrix, x) -> np.ndarray:
    n = P.n
    x = _check_length(x, n)
    return (P.P @ x.reshape(n, n) @ P.P.T).ravel()


def apply_kron_transpose(P: TransitionMatrix, x) -> np.ndarray:
    n = P.n
    x = _check_length(x, n)
    return (P.P.T @ x.reshape(n, n) @ P.P).ravel()


def apply_L(P: TransitionMatrix, x) -> np.ndarray:
    return np.asarray(x, dtype=float) - apply_kron(P, x)


def apply_L_transpose(P: TransitionMatrix, x) -> np.ndarray:
    return np.asarray(x, dtype=float) - apply_kron_transpose(P, x)


def apply_Lkill(P: TransitionMatrix, x) -> np.ndarray:
    return np.asarray(x, dtype=float) - apply_kron(P, apply_E(x, P.n))


def apply_Lkill_transpose(P: TransitionMatrix, x) -> np.ndarray:
    return np.asarray(x, dtype=float) \
        - apply_E(apply_kron_transpose(P, x), P.n)


class PairOperator(LinearOperator):
    """Matrix-free operator on the n^2-dimensional pair space.

    Modes
    -----
    "kron"         : P ⊗ P
    "L"            : I - P ⊗ P
    "L_kill"       : I - (P ⊗ P) E
    "perturbation" : (P ⊗ P)(E - I), so that L_kill = L - perturbation

    Every application allocates a fresh output, so one operator can serve
    concurrent callers.
    """

    MODES = ("kron", "L", "L_kill", "perturbation")

    def __init__(self, P: TransitionMatrix, mode: str = "L_kill"):
        utils.check_type("P", P, TransitionMatrix)
        if mode not in self.MODES:
            err_msg = "mode=%s is not defined!"%(mode)
            write_log(err_msg, "error")
            raise InvalidParameterError("mode", mode, err_msg)

        self._tm = P
        self._mode = mode
        self._n = P.n
        super().__init__(dtype=np.float64, shape=(P.n**2, P.n**2))

    def __str__(self):
        return "%s(n=%d, mode=%s)"%(self.__class__.__name__,
                                    self._n,
                                    self._mode)

    def __repr__(self):
        return str(self)

    @property
    def transition(self) -> TransitionMatrix:
        return self._tm

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def n(self) -> int:
        return self._n

    def apply(self, x) -> np.ndarray:
        x = _check_length(x, self._n)
        return self._matvec(x)

    def apply_transpose(self, x) -> np.ndarray:
        x = _check_length(x, self._n)
        return self._rmatvec(x)

    def _forward(self, X):
        # X: (b, n^2) batch of input vectors, returns (b, n^2).
        n, P = self._n, self._tm.P
        b = X.shape[0]
        cube = X.reshape(b, n, n)
        if self._mode == "kron":
            return _kron_batch(P, cube).reshape(b, -1)
        elif self._mode == "L":
            return X - _kron_batch(P, cube).reshape(b, -1)
        elif self._mode == "L_kill":
            killed = _kill(cube.copy().reshape(b, -1), n).reshape(b, n, n)
            return X - _kron_batch(P, killed).reshape(b, -1)
        else:
            # (P⊗P)(E - I) x = -(P⊗P) x_D, x_D the diagonal part of x.
            diag_part = X - _kill(X.copy(), n)
            return -_kron_batch(P, diag_part.reshape(b, n, n)).reshape(b, -1)

    def _backward(self, X):
        n, P = self._n, self._tm.P
        b = X.shape[0]
        cube = X.reshape(b, n, n)
        if self._mode == "kron":
            return _kron_t_batch(P, cube).reshape(b, -1)
        elif self._mode == "L":
            return X - _kron_t_batch(P, cube).reshape(b, -1)
        elif self._mode == "L_kill":
            Y = _kron_t_batch(P, cube).reshape(b, -1)
            return X - _kill(Y, n)
        else:
            Y = _kron_t_batch(P, cube).reshape(b, -1)
            return -(Y - _kill(Y.copy(), n))

    def _matvec(self, x):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return self._forward(x).ravel()

    def _rmatvec(self, x):
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return self._backward(x).ravel()

    def _matmat(self, X):
        X = np.asarray(X, dtype=float)
        return self._forward(np.ascontiguousarray(X.T)).T

    def _rmatmat(self, X):
        X = np.asarray(X, dtype=float)
        return self._backward(np.ascontiguousarray(X.T)).T

    def _adjoint(self):
        return _AdjointPairOperator(self)


class _AdjointPairOperator(LinearOperator):

    def __init__(self, op: PairOperator):
        self._op = op
        super().__init__(dtype=np.float64, shape=op.shape)

    def _matvec(self, x):
        return self._op._rmatvec(x)

    def _rmatvec(self, x):
        return self._op._matvec(x)

    def _matmat(self, X):
        return self._op._rmatmat(X)

    def _rmatmat(self, X):
        return self._op._matmat(X)

    def _adjoint(self):
        return self._op


def dense_threshold() -> int:
    return utils.get_setting("PAIRSPACE", "DENSE_THRESHOLD")


def materialize(op: PairOperator, threshold: int = None) -> np.ndarray:
    """Dense n^2 x n^2 matrix whose column j is op.apply(e_j)."""
    utils.check_type("op", op, PairOperator)
    if threshold is None:
        threshold = dense_threshold()

    if op.n > threshold:
        err_msg = "Refusing to materialise a pair operator with n=%d " \
                  "(dense threshold %d)."%(op.n, threshold)
        write_log(err_msg, "error")
        raise DenseSizeError(op.n, threshold, err_msg)

    return op.matmat(np.eye(op.shape[1]))
