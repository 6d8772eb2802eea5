import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bellcv.hypercomplex import cd_multiply, multiply, norm2, structure_constants


def unit(i, dim):
    e = np.zeros(dim)
    e[i] = 1
    return e


def test_complex_numbers():
    assert np.allclose(multiply([1, 2], [3, -1]), [5, 5])


def test_quaternion_table():
    i, j, k = (unit(n, 4) for n in (1, 2, 3))
    assert np.allclose(multiply(i, j), k)
    assert np.allclose(multiply(j, k), i)
    assert np.allclose(multiply(k, i), j)
    assert np.allclose(multiply(j, i), -k)
    for e in (i, j, k):
        assert np.allclose(multiply(e, e), -unit(0, 4))


def test_octonion_units_square_to_minus_one():
    for n in range(1, 8):
        e = unit(n, 8)
        assert np.allclose(multiply(e, e), -unit(0, 8))


def test_octonions_are_not_associative():
    e1, e2, e4 = unit(1, 8), unit(2, 8), unit(4, 8)
    left = multiply(multiply(e1, e2), e4)
    right = multiply(e1, multiply(e2, e4))
    assert np.allclose(left, -right)


def test_structure_constants_match_product():
    for dim in (1, 2, 4, 8):
        S = structure_constants(dim)
        assert S.shape == (dim, dim, dim)
        for a in range(dim):
            for b in range(dim):
                assert np.allclose(S[a, b], cd_multiply(unit(a, dim), unit(b, dim)))


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        structure_constants(3)


vec8 = arrays(np.float64, 8, elements=st.floats(-3, 3))


@given(vec8, vec8)
def test_octonion_norm_is_multiplicative(x, y):
    assert norm2(multiply(x, y)) == pytest.approx(norm2(x) * norm2(y), rel=1e-9, abs=1e-9)


@given(vec8, vec8)
def test_octonions_are_alternative(x, y):
    assert np.allclose(multiply(multiply(x, x), y), multiply(x, multiply(x, y)), atol=1e-8)
