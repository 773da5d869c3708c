import numpy as np
import pytest

from pairmeet.pairspace import PairIndex
from pairmeet.pairspace import PairOperator
from pairmeet.pairspace import flatten
from pairmeet.pairspace import apply_E
from pairmeet.pairspace import apply_kron
from pairmeet.pairspace import apply_kron_transpose
from pairmeet.pairspace import apply_L
from pairmeet.pairspace import apply_Lkill
from pairmeet.pairspace import apply_Lkill_transpose
from pairmeet.pairspace import materialize
from pairmeet.exception import DimensionError
from pairmeet.exception import PairIndexError
from pairmeet.exception import DenseSizeError
from pairmeet.exception import InvalidParameterError

from conftest import random_stochastic
from conftest import complete_chain


def _E(n):
    e = np.ones(n * n)
    e[::n + 1] = 0.
    return np.diag(e)


def test_pair_index():
    index = PairIndex(3)
    assert index.size == 9
    assert index.flatten(1, 1) == 1
    assert index.flatten(2, 3) == 6
    assert index.unflatten(6) == (2, 3)
    assert index.diagonal().tolist() == [1, 5, 9]
    assert flatten(3, 3, 3) == 9

    with pytest.raises(PairIndexError):
        index.flatten(0, 1)
    with pytest.raises(PairIndexError):
        index.unflatten(10)


def test_apply_E_kills_diagonal_only():
    x = np.arange(1., 10.)
    y = apply_E(x)
    assert y[[0, 4, 8]].tolist() == [0., 0., 0.]
    np.testing.assert_array_equal(np.delete(y, [0, 4, 8]),
                                  np.delete(x, [0, 4, 8]))
    np.testing.assert_array_equal(apply_E(y), y)
    assert x[0] == 1.


def test_functions_match_explicit_kron():
    n = 4
    P = random_stochastic(n, 0)
    K = np.kron(P.P, P.P)
    x = np.random.default_rng(1).standard_normal(n * n)

    np.testing.assert_allclose(apply_kron(P, x), K @ x)
    np.testing.assert_allclose(apply_kron_transpose(P, x), K.T @ x)
    np.testing.assert_allclose(apply_L(P, x), x - K @ x)
    np.testing.assert_allclose(apply_Lkill(P, x), x - K @ _E(n) @ x)
    np.testing.assert_allclose(apply_Lkill_transpose(P, x),
                               x - _E(n) @ K.T @ x)


@pytest.mark.parametrize("mode", PairOperator.MODES)
def test_operator_modes(mode):
    n = 3
    P = random_stochastic(n, 2)
    K = np.kron(P.P, P.P)
    I = np.eye(n * n)
    expected = {"kron": K,
                "L": I - K,
                "L_kill": I - K @ _E(n),
                "perturbation": K @ (_E(n) - I)}[mode]

    op = PairOperator(P, mode)
    np.testing.assert_allclose(materialize(op), expected, atol=1e-14)
    np.testing.assert_allclose(materialize(op).T,
                               op.H.matmat(np.eye(n * n)),
                               atol=1e-14)

    X = np.random.default_rng(3).standard_normal((n * n, 2))
    np.testing.assert_allclose(op.matmat(X), expected @ X, atol=1e-13)
    np.testing.assert_allclose(op.rmatmat(X), expected.T @ X, atol=1e-13)


def test_lkill_is_l_minus_perturbation():
    P, _ = complete_chain(4)
    A = materialize(PairOperator(P, "L_kill"))
    B = materialize(PairOperator(P, "L")) \
        - materialize(PairOperator(P, "perturbation"))
    np.testing.assert_allclose(A, B, atol=1e-14)


def test_killed_kron_is_substochastic():
    P = random_stochastic(5, 4)
    killed = np.eye(25) - materialize(PairOperator(P, "L_kill"))
    row_sums = killed.sum(axis=1)
    assert np.all(killed >= -1e-15)
    assert np.all(row_sums <= 1. + 1e-12)
    assert np.all(row_sums < 1.)


def test_dimension_errors():
    P = random_stochastic(3, 5)
    with pytest.raises(DimensionError) as info:
        apply_kron(P, np.ones(8))
    assert info.value.expected == 9
    with pytest.raises(DimensionError):
        PairOperator(P).apply(np.ones(10))
    with pytest.raises(InvalidParameterError):
        PairOperator(P, "gram")


def test_materialize_refuses_large():
    P = random_stochastic(5, 6)
    with pytest.raises(DenseSizeError) as info:
        materialize(PairOperator(P), threshold=4)
    assert info.value.threshold == 4


@pytest.mark.parametrize("seed", [0, 7])
def test_fixed_vectors(seed):
    n = 6
    P = random_stochastic(n, seed)
    ones = np.ones(n * n)
    vec_I = np.eye(n).ravel()

    np.testing.assert_allclose(apply_L(P, ones), 0., atol=1e-14)
    np.testing.assert_allclose(apply_kron(P, ones), ones, atol=1e-14)
    # E removes the diagonal pairs, so vec(I) passes through L_kill.
    np.testing.assert_allclose(apply_Lkill(P, vec_I), vec_I, atol=1e-15)


@pytest.mark.parametrize("mode", PairOperator.MODES)
def test_adjoint_identity(mode):
    n = 6
    P = random_stochastic(n, 11)
    op = PairOperator(P, mode)
    rng = np.random.default_rng(12)
    for _ in range(5):
        x = rng.standard_normal(n * n)
        y = rng.standard_normal(n * n)
        lhs = float(op.apply(x) @ y)
        rhs = float(x @ op.apply_transpose(y))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
    # end of for


def test_adjoint_identity_of_functions():
    n = 5
    P = random_stochastic(n, 13)
    rng = np.random.default_rng(14)
    x = rng.standard_normal(n * n)
    y = rng.standard_normal(n * n)
    assert float(apply_kron(P, x) @ y) == pytest.approx(
        float(x @ apply_kron_transpose(P, y)), rel=1e-12, abs=1e-12)
    assert float(apply_Lkill(P, x) @ y) == pytest.approx(
        float(x @ apply_Lkill_transpose(P, y)), rel=1e-12, abs=1e-12)
