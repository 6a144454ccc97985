import math

import numpy as np
import pytest
from scipy.special import gamma, zeta

from src.errors import DomainError, UnsupportedOrderError
from src.fermi import (
    SERIES_EDGE,
    SOMMERFELD_EDGE,
    FermiOrder,
    fermi_function,
    fermi_integral,
    fermi_integral_derivative,
    fermi_integral_prime,
    fermi_order,
)
from src.selftest import quad_fermi_integral

ORDERS = [-0.5, 0.5, 1.0, 1.5]


def relative(a, b):
    return abs(a - b) / abs(b)


def test_i1_at_zero():
    assert relative(fermi_integral(1.0, 0.0), math.pi**2 / 12.0) < 1e-10


@pytest.mark.parametrize("k", [-0.5, 0.5, 1.5])
def test_value_at_zero_matches_eta(k):
    expected = float(gamma(k + 1.0)) * (1.0 - 2.0 ** (-k)) * float(zeta(k + 1.0))
    assert relative(fermi_integral(k, 0.0), expected) < 1e-10


@pytest.mark.parametrize("k", ORDERS)
@pytest.mark.parametrize("x", [-30.0, -5.0001, -5.0, -1.3, 0.7, 12.5, 39.999, 40.0, 60.0])
def test_against_quadrature(k, x):
    assert relative(fermi_integral(k, x), quad_fermi_integral(k, x)) < 1e-10


@pytest.mark.parametrize("k", ORDERS)
@pytest.mark.parametrize("edge", [SERIES_EDGE, SOMMERFELD_EDGE])
def test_continuous_across_regime_edges(k, edge):
    below = fermi_integral(k, edge - 1e-9)
    above = fermi_integral(k, edge)
    assert relative(below, above) < 1e-8


@pytest.mark.parametrize("k", ORDERS)
def test_nondegenerate_limit(k):
    x = -40.0
    assert relative(fermi_integral(k, x), float(gamma(k + 1.0)) * math.exp(x)) < 1e-10


@pytest.mark.parametrize("k", ORDERS)
def test_degenerate_leading_term(k):
    x = 1e4
    assert relative(fermi_integral(k, x), x ** (k + 1.0) / (k + 1.0)) < 1e-6


def test_scalar_and_array_inputs():
    assert isinstance(fermi_integral(0.5, 1.0), float)
    x = np.linspace(-10.0, 50.0, 7).reshape(7, 1)
    values = fermi_integral(0.5, x)
    assert values.shape == (7, 1)
    assert np.all(np.diff(values[:, 0]) > 0.0)


@pytest.mark.parametrize("k", [0.0, 2.0, -1.5, "half"])
def test_unsupported_order(k):
    with pytest.raises(UnsupportedOrderError):
        fermi_integral(k, 0.0)


def test_unsupported_order_is_value_error():
    with pytest.raises(ValueError):
        fermi_order(3.0)
    assert fermi_order(1.5) is FermiOrder.THREE_HALVES


@pytest.mark.parametrize("x", [math.inf, -math.inf, math.nan])
def test_non_finite_argument(x):
    with pytest.raises(DomainError):
        fermi_integral(0.5, x)


@pytest.mark.parametrize("k", [0.5, 1.5])
@pytest.mark.parametrize("x", [-8.0, 0.0, 4.0, 45.0])
def test_prime_is_lower_order(k, x):
    assert relative(fermi_integral_prime(k, x), k * fermi_integral(k - 1.0, x)) < 1e-12
    step = 1e-5 * max(1.0, abs(x))
    difference = (fermi_integral(k, x + step) - fermi_integral(k, x - step)) / (2.0 * step)
    assert relative(fermi_integral_prime(k, x), difference) < 1e-6


def test_prime_rejects_other_orders():
    with pytest.raises(UnsupportedOrderError):
        fermi_integral_prime(-0.5, 0.0)


@pytest.mark.parametrize("x", [-6.0, -2.0, 1.0, 20.0, 41.0])
def test_derivative_orders(x):
    assert fermi_integral_derivative(1.5, x, 0) == pytest.approx(fermi_integral(1.5, x), rel=1e-10)
    assert fermi_integral_derivative(1.5, x, 1) == pytest.approx(1.5 * fermi_integral(0.5, x), rel=1e-9)
    assert fermi_integral_derivative(0.5, x, 1) == pytest.approx(0.5 * fermi_integral(-0.5, x), rel=1e-9)


def test_second_derivative_by_difference():
    x, step = 2.0, 1e-4
    first = lambda y: fermi_integral_derivative(-0.5, y, 1)  # noqa: E731
    difference = (first(x + step) - first(x - step)) / (2.0 * step)
    assert fermi_integral_derivative(-0.5, x, 2) == pytest.approx(difference, rel=1e-6)


@pytest.mark.parametrize("order", [-1, 8, 1.5])
def test_derivative_order_range(order):
    with pytest.raises(DomainError):
        fermi_integral_derivative(0.5, 0.0, order)


def test_fermi_function_is_overflow_safe():
    assert fermi_function(1000.0) == 0.0
    assert fermi_function(-1000.0) == 1.0
    assert fermi_function(0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("k", ORDERS)
def test_increasing_across_all_regimes(k):
    x = np.arange(-60.0, 150.0, 0.25)
    assert np.all(np.diff(fermi_integral(k, x)) > 0.0)


@pytest.mark.parametrize("k", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("step", [0.1, 0.5, 2.0])
def test_convex_for_nonnegative_orders(k, step):
    x = np.arange(-40.0, 120.0, step)
    values = fermi_integral(k, x)
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    assert np.all(second >= -1e-12 * values[1:-1])


@pytest.mark.parametrize("k", [0.5, 1.5])
@pytest.mark.parametrize("x", [-20.0, -1.0, 0.0, 1.0, 20.0, 100.0])
def test_prime_matches_central_difference(k, x):
    step = 1e-5 * max(1.0, abs(x))
    difference = (fermi_integral(k, x + step) - fermi_integral(k, x - step)) / (2.0 * step)
    assert abs(fermi_integral_prime(k, x) - difference) / max(1.0, fermi_integral(k, x)) <= 1e-6


@pytest.mark.parametrize("k", ORDERS)
def test_limit_ratios(k):
    nondegenerate = fermi_integral(k, -30.0) / (float(gamma(k + 1.0)) * math.exp(-30.0))
    degenerate = fermi_integral(k, 400.0) / (400.0 ** (k + 1.0) / (k + 1.0))
    assert 0.999 <= nondegenerate <= 1.001
    assert 0.99 <= degenerate <= 1.01
