import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from duolayer import Spectrum, as_matrix, as_vector, eig, kron, rank, solve_least_squares

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


def small_matrix(rows, cols):
    return arrays(np.float64, (rows, cols), elements=finite)


def test_as_matrix_rejects_wrong_ndim():
    with pytest.raises(ValueError):
        as_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((2, 2, 2)))


def test_as_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        as_matrix([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        as_vector([np.inf])


def test_as_vector_rejects_matrix():
    with pytest.raises(ValueError):
        as_vector([[1.0], [2.0]])


def test_kron_hand_expansion():
    a = [[1.0, 2.0], [3.0, 4.0]]
    b = [[0.0, 1.0], [1.0, 0.0]]
    expected = np.array(
        [
            [0.0, 1.0, 0.0, 2.0],
            [1.0, 0.0, 2.0, 0.0],
            [0.0, 3.0, 0.0, 4.0],
            [3.0, 0.0, 4.0, 0.0],
        ]
    )
    assert np.array_equal(kron(a, b), expected)


def test_kron_with_identity_is_block_scaling():
    a = [[2.0, -1.0], [0.0, 3.0]]
    out = kron(a, np.eye(3))
    assert out.shape == (6, 6)
    assert np.array_equal(out[:3, :3], 2.0 * np.eye(3))
    assert np.array_equal(out[:3, 3:], -1.0 * np.eye(3))


@settings(max_examples=25)
@given(small_matrix(2, 2), small_matrix(2, 2), small_matrix(2, 2), small_matrix(2, 2))
def test_kron_mixed_product(a, b, c, d):
    left = kron(a, b) @ kron(c, d)
    right = kron(a @ c, b @ d)
    assert np.allclose(left, right, atol=1e-8)


def test_rank_basic_cases():
    assert rank(np.zeros((3, 3))) == 0
    assert rank(np.eye(4)) == 4
    assert rank([[1.0, 2.0], [2.0, 4.0]]) == 1


def test_rank_of_nilpotent_drops_when_squared():
    n = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert rank(n) == 1
    assert rank(n @ n) == 0


def test_eig_diagonal_sorted():
    sp = eig(np.diag([-1.0, -2.0]))
    assert isinstance(sp, Spectrum)
    assert np.array_equal(sp.eigenvalues, np.array([-2.0, -1.0], dtype=complex))
    assert sp.rank == 2
    assert sp.rank_squared == 2


def test_eig_zero_matrix():
    sp = eig(np.zeros((2, 2)))
    assert np.array_equal(sp.eigenvalues, np.zeros(2, dtype=complex))
    assert sp.rank == 0
    assert sp.rank_squared == 0


def test_eig_symmetric_has_exactly_real_eigenvalues():
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    sp = eig(m)
    assert np.all(sp.eigenvalues.imag == 0.0)
    assert np.allclose(sp.eigenvalues.real, [1.0, 3.0])


def test_eig_rejects_non_square():
    with pytest.raises(ValueError):
        eig(np.zeros((2, 3)))


def test_eig_detects_defective_kernel():
    sp = eig([[0.0, 1.0], [0.0, 0.0]])
    assert sp.rank == 1
    assert sp.rank_squared == 0
    assert sp.rank != sp.rank_squared


@settings(max_examples=25)
@given(small_matrix(3, 2))
def test_rank_is_transpose_invariant(m):
    assert rank(m) == rank(m.T)


def test_solve_least_squares_square_exact():
    a = np.array([[2.0, 0.0], [0.0, 4.0]])
    x = solve_least_squares(a, [2.0, 8.0])
    assert np.allclose(x, [1.0, 2.0])


def test_solve_least_squares_minimum_norm():
    # underdetermined: the minimum-norm solution of x0 + x1 = 2 is (1, 1)
    x = solve_least_squares([[1.0, 1.0]], [2.0])
    assert np.allclose(x, [1.0, 1.0])


def test_solve_least_squares_overdetermined():
    x = solve_least_squares([[1.0], [1.0]], [0.0, 2.0])
    assert np.allclose(x, [1.0])


def test_solve_least_squares_shape_mismatch():
    with pytest.raises(ValueError):
        solve_least_squares(np.eye(2), [1.0, 2.0, 3.0])
