import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossaug.tensor import DomainError, Rng, ShapeError, draw, map_elementwise, matmul, reduce, zip_elementwise


def test_matmul_hand_example():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[5.0], [6.0]])
    np.testing.assert_array_equal(matmul(a, b), [[17.0], [39.0]])


def test_matmul_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_elementwise():
    x = np.array([[-1.0, 2.0]])
    np.testing.assert_array_equal(map_elementwise(x, np.abs), [[1.0, 2.0]])
    np.testing.assert_array_equal(zip_elementwise(x, x, lambda p, q: p * q), [[1.0, 4.0]])
    with pytest.raises(ShapeError):
        zip_elementwise(x, np.zeros((2, 2)), np.add)


def test_reduce_kinds():
    x = np.array([[1.0, 5.0, 3.0], [4.0, 2.0, 6.0]])
    np.testing.assert_array_equal(reduce(x, 1, "sum"), [9.0, 12.0])
    np.testing.assert_array_equal(reduce(x, 0, "mean"), [2.5, 3.5, 4.5])
    np.testing.assert_array_equal(reduce(x, 1, "max"), [5.0, 6.0])
    np.testing.assert_array_equal(reduce(x, 1, "argmax"), [1, 2])
    with pytest.raises(DomainError):
        reduce(np.zeros((0, 3)), 0, "mean")


def test_rng_reproducible_and_children_independent():
    a, b = Rng(5), Rng(5)
    np.testing.assert_array_equal(a.normal(10), b.normal(10))
    c0, c1 = Rng(5).child(0), Rng(5).child(1)
    assert not np.array_equal(c0.uniform(10), c1.uniform(10))
    # a child does not depend on how much the parent has drawn
    p = Rng(5)
    p.normal(100)
    np.testing.assert_array_equal(p.child(3).uniform(4), Rng(5).child(3).uniform(4))


def test_rng_distributions():
    r = Rng(0)
    z = r.normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01
    u = r.uniform(100_000)
    assert 0.0 <= u.min() and u.max() < 1.0
    assert sorted(r.permutation(7)) == list(range(7))
    picks = r.choice(10, 4)
    assert len(set(picks.tolist())) == 4
    assert draw(Rng(1), "standard_normal", (3,)).shape == (3,)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_matmul_matches_loops(n, k, m, seed):
    r = Rng(seed)
    a, b = r.normal((n, k)), r.normal((k, m))
    ref = np.array([[sum(a[i, t] * b[t, j] for t in range(k)) for j in range(m)] for i in range(n)])
    np.testing.assert_allclose(matmul(a, b), ref, rtol=1e-12, atol=1e-12)
