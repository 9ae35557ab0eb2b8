import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridgw.core import UniformGrid1D, UniformGrid2D
from gridgw.errors import (
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    NotSquareGrid,
    TooLargeToMaterialize,
)
from gridgw.fast_multiply import (
    MATERIALIZE_LIMIT,
    BinomialTable,
    PrecisionWarning,
    apply_distance,
    apply_lower,
    apply_upper,
    binomial_table,
    corrupted_binomials,
    count_lower_operations,
    dense_distance_matrix,
    dense_triple_product,
    magnitude_bound,
    naive_triple_product,
    triple_product,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_binomial_table_pascal():
    table = BinomialTable.build(10)
    assert table.satisfies_pascal()
    assert table(5, 2) == 10.0
    assert table(7, 0) == 1.0 and table(7, 7) == 1.0


def test_fault_injection_breaks_pascal_and_restores():
    with corrupted_binomials():
        assert not binomial_table(3).satisfies_pascal()
    assert binomial_table(3).satisfies_pascal()


def test_lower_and_upper_hand_values():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(apply_lower(x, 2), [0, 1, 6, 20])
    np.testing.assert_array_equal(apply_lower(x, 1), [0, 1, 4, 10])
    np.testing.assert_array_equal(apply_upper(x, 1), [20, 11, 4, 0])


def test_distance_1d_and_2d_hand_values():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(apply_distance(x, UniformGrid1D(4)), [20, 12, 8, 10])
    # 2x2 grid, column-major points (0,0), (1,0), (0,1), (1,1)
    np.testing.assert_array_equal(apply_distance(x, UniformGrid2D(2)), [13, 11, 9, 7])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [1, 2, 5, 33])
def test_lower_matches_dense(k, n, rng):
    x = rng.uniform(size=n)
    i = np.arange(n)
    dense = np.tril(np.abs(i[:, None] - i[None, :]).astype(float) ** k, -1)
    np.testing.assert_allclose(apply_lower(x, k), dense @ x, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_operation_counts(k, rng):
    n = 50
    x = rng.uniform(size=n)
    y, counts = count_lower_operations(x, k)
    # the instrumented twin performs exactly the same arithmetic
    np.testing.assert_array_equal(y, apply_lower(x, k))
    assert counts["mult"] == (n - 1) * k * (k + 1) // 2
    assert counts["add"] == (n - 1) * (k + 1) * (k + 2) // 2


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=finite), st.integers(1, 4))
def test_upper_is_bitwise_reversed_lower(x, k):
    np.testing.assert_array_equal(apply_upper(x, k), apply_lower(x[::-1], k)[::-1])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(1, 3), st.floats(-5, 5), st.integers(0, 2**31))
def test_linearity(n, k, alpha, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(size=n), rng.uniform(size=n)
    grid = UniformGrid1D(n, 0.1, k)
    lhs = apply_distance(alpha * x + y, grid)
    rhs = alpha * apply_distance(x, grid) + apply_distance(y, grid)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-11 * np.abs(rhs).max())


def test_distance_operator_is_symmetric(rng):
    grid = UniformGrid2D(5, 0.3, 2)
    x, y = rng.uniform(size=25), rng.uniform(size=25)
    assert x @ apply_distance(y, grid) == pytest.approx(y @ apply_distance(x, grid), rel=1e-13)


@pytest.mark.parametrize("grid", [UniformGrid1D(40, 0.05, 1), UniformGrid1D(40, 0.05, 3),
                                  UniformGrid2D(7, 0.5, 1), UniformGrid2D(7, 0.5, 2)])
def test_apply_distance_matches_dense(grid, rng):
    x = rng.uniform(size=grid.points)
    d = dense_distance_matrix(grid)
    np.testing.assert_allclose(apply_distance(x, grid), d @ x, rtol=1e-13)


def test_power_override_gives_squared_distances(rng):
    grid = UniformGrid2D(6, 0.2, 1)
    x = rng.uniform(size=36)
    d = dense_distance_matrix(grid)
    np.testing.assert_allclose(apply_distance(x, grid, 2), (d * d) @ x, rtol=1e-13)


@pytest.mark.parametrize("gx,gy", [
    (UniformGrid1D(12, 0.1, 1), UniformGrid1D(9, 0.2, 2)),
    (UniformGrid2D(4, 0.5, 2), UniformGrid2D(3, 1.0, 1)),
    (UniformGrid1D(10, 0.1, 1), UniformGrid2D(3, 0.5, 1)),
    (UniformGrid2D(3, 0.5, 3), UniformGrid1D(7, 0.1, 2)),
])
def test_triple_product_matches_dense(gx, gy, rng):
    g = rng.uniform(size=(gx.points, gy.points))
    dx, dy = dense_distance_matrix(gx), dense_distance_matrix(gy)
    exact = dx @ g @ dy
    np.testing.assert_allclose(triple_product(g, gx, gy), exact, rtol=1e-12)
    np.testing.assert_allclose(naive_triple_product(g, gx, gy), exact, rtol=1e-12)
    np.testing.assert_allclose(dense_triple_product(dx, g, dy, "blas"), exact, rtol=1e-12)


def test_single_point_grid():
    grid = UniformGrid1D(1)
    assert apply_distance(np.array([3.0]), grid)[0] == 0.0
    assert triple_product(np.array([[1.0]]), grid, grid)[0, 0] == 0.0


def test_input_errors():
    with pytest.raises(EmptyInput):
        apply_lower(np.array([]), 1)
    with pytest.raises(LengthMismatch):
        apply_distance(np.ones(3), UniformGrid1D(4))
    with pytest.raises(NotSquareGrid):
        from gridgw.fast_multiply import apply_distance_2d
        apply_distance_2d(np.ones(4), UniformGrid1D(4))
    with pytest.raises(DimensionMismatch):
        triple_product(np.ones((3, 3)), UniformGrid1D(3), UniformGrid1D(4))


def test_materialize_guard():
    big = UniformGrid1D(MATERIALIZE_LIMIT + 1)
    with pytest.raises(TooLargeToMaterialize):
        dense_distance_matrix(big)


def test_precision_warning_for_huge_coefficients():
    grid = UniformGrid1D(2000, 1.0, 5)
    assert magnitude_bound(grid) > 1e15
    with pytest.warns(PrecisionWarning):
        apply_distance(np.ones(2000), grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        apply_distance(np.ones(2000), UniformGrid1D(2000, 1.0 / 1999, 2))
