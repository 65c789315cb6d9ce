import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fednormec.vecmath import (InvalidInputError, RngStream, as_vector, gaussian_vector, norm,
                               smoothed_normalize)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_normalize_examples():
    assert np.array_equal(smoothed_normalize(np.zeros(3), 1.0), np.zeros(3))
    assert np.array_equal(smoothed_normalize(np.zeros(3), 0.0), np.zeros(3))
    np.testing.assert_allclose(smoothed_normalize([3.0, 4.0], 0.0), [0.6, 0.8], rtol=1e-15)
    np.testing.assert_allclose(smoothed_normalize([3.0, 4.0], 1.0), [0.5, 2 / 3], rtol=1e-15)


def test_normalize_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        smoothed_normalize([np.nan, 1.0], 1.0)
    with pytest.raises(InvalidInputError):
        smoothed_normalize([1.0], -0.5)


@given(arrays(np.float64, st.integers(1, 8), elements=finite), st.floats(0, 10))
def test_normalize_bounded(v, alpha):
    out = smoothed_normalize(v, alpha)
    n = np.linalg.norm(out)
    assert n <= 1 + 1e-12
    # strictness is only observable when alpha is not lost to rounding against ||v||
    if alpha > 4 * np.finfo(float).eps * np.linalg.norm(v):
        assert n < 1


@given(arrays(np.float64, (5, 3), elements=finite), st.floats(0, 5))
def test_normalize_rows_match_single(V, alpha):
    rows = smoothed_normalize(V, alpha)
    for i in range(5):
        np.testing.assert_array_equal(rows[i], smoothed_normalize(V[i], alpha))


def test_norm_examples():
    assert norm([3.0, 4.0]) == 5.0
    assert norm(np.zeros(4)) == 0.0
    assert norm([1.0, 1.0, 1.0, 1.0]) == 2.0


def test_as_vector_is_readonly_and_checked():
    v = as_vector([1, 2, 3])
    assert v.dtype == np.float64 and not v.flags.writeable
    with pytest.raises(InvalidInputError):
        as_vector([1.0, np.inf])
    with pytest.raises(InvalidInputError):
        as_vector([1.0, 2.0], d=3)


def test_gaussian_vector():
    s = RngStream(3, 1, 2, "dp-noise")
    assert np.array_equal(gaussian_vector(s, 3, 0.0), np.zeros(3))
    np.testing.assert_array_equal(gaussian_vector(s, 4, 1.0), gaussian_vector(s, 4, 1.0))
    with pytest.raises(InvalidInputError):
        gaussian_vector(s, 0, 1.0)
    draws = gaussian_vector(RngStream(0, purpose="dp-noise"), 100_000, 1.0)
    assert abs(draws.var() - 1.0) < 0.03


def test_streams_are_keyed_independently():
    a = RngStream(7, 2, 0, "dp-noise").generator().standard_normal(4)
    b = RngStream(7, 2, 1, "dp-noise").generator().standard_normal(4)
    c = RngStream(7, 2, 0, "participation").generator().standard_normal(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    # order of evaluation does not matter
    np.testing.assert_array_equal(a, RngStream(7, 2, 0, "dp-noise").generator().standard_normal(4))
    with pytest.raises(InvalidInputError):
        RngStream(0, purpose="bogus")


def test_streams_statistically_uncorrelated():
    X = np.array([RngStream(1, 0, i, "dp-noise").generator().standard_normal(5000) for i in range(10)])
    C = np.corrcoef(X)
    off = C[~np.eye(10, dtype=bool)]
    assert np.abs(off).max() < 0.06
