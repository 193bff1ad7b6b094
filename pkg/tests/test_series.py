"""ErrorSeries container semantics."""

import math

import pytest

from imapprox.series import ErrorSeries


def test_entries_normalized_and_ordered():
    s = ErrorSeries(((1, 14), (2, 1.5)), 8)
    assert s.entries == ((1, 14.0), (2, 1.5))
    assert s.counts == (1, 2)
    assert s.errors == (14.0, 1.5)


def test_rejects_bad_construction():
    with pytest.raises(ValueError):
        ErrorSeries(((2, 1.0), (2, 2.0)), 4)
    with pytest.raises(ValueError):
        ErrorSeries(((3, 1.0), (2, 2.0)), 4)
    with pytest.raises(ValueError):
        ErrorSeries(((0, 1.0),), 4)
    with pytest.raises(ValueError):
        ErrorSeries(((1, 1.0),), 0)


def test_error_at_unknown_level():
    s = ErrorSeries(((1, 5.0),), 4)
    assert s.error_at(1) == 5.0
    with pytest.raises(KeyError):
        s.error_at(2)


def test_sigma_is_sqrt_e_over_n():
    # E = N * sigma^2
    s = ErrorSeries(((1, 32.0), (2, 8.0)), 8)
    assert s.sigma_at(1) == pytest.approx(2.0)
    assert s.sigma_at(2) == pytest.approx(1.0)
    assert s.sigmas() == ((1, 2.0), (2, 1.0))


def test_monotone_predicate():
    assert ErrorSeries(((1, 10.0), (2, 4.0), (3, 4.0)), 4).is_monotone()
    assert not ErrorSeries(((1, 10.0), (2, 4.0), (3, 5.0)), 4).is_monotone()


def test_convexity_predicate():
    # E_i <= (E_{i-1} + E_{i+1}) / 2 at interior levels
    convex = ErrorSeries(((1, 14.0), (2, 1.5), (3, 0.75), (4, 0.0)), 8)
    assert convex.is_convex()
    assert convex.convexity_violations() == []

    # interior value above the chord midpoint
    bent = ErrorSeries(((1, 10.0), (2, 9.0), (3, 0.0)), 8)
    assert not bent.is_convex()
    levels = [g for g, _ in bent.convexity_violations()]
    assert levels == [2]

    # equality on the chord is not a violation
    flat = ErrorSeries(((1, 4.0), (2, 2.0), (3, 0.0)), 8)
    assert flat.is_convex()


def test_convexity_tolerance():
    bent = ErrorSeries(((1, 10.0), (2, 5.1), (3, 0.0)), 8)
    assert not bent.is_convex()
    assert bent.is_convex(tol=0.2)


def test_truncated():
    s = ErrorSeries(((1, 3.0), (2, 2.0), (3, 1.0)), 4)
    assert s.truncated(2).entries == ((1, 3.0), (2, 2.0))
    assert s.truncated(9).entries == s.entries
    assert s.truncated(2).pixel_count == 4
