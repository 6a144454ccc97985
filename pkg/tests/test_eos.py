import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import gamma, zeta

from src.eos import (
    DENSITY_BOUND_CONSTANTS,
    PRESSURE_BOUND_CONSTANTS,
    PRESSURE_PREFACTOR,
    LowestLandauGas,
    MagneticGas,
    NonmagneticGas,
    calibrate_bounds,
    degeneracy,
    density_bounds,
    dos_pressure,
    gas_density,
    gas_pressure,
    integrated_dos,
    landau_density,
    landau_pressure,
    landau_sum,
    lll_pressure,
    momentum_density,
    momentum_pressure,
    nondegenerate_pressure,
    nonmagnetic_pressure,
    pressure_bounds,
    zero_t_pressure,
)
from src.errors import DomainError, UnsupportedOrderError
from src.fermi import fermi_integral
from src.models import GasState
from src.selftest import WEAK_FIELDS, weak_field_gaps

STATES = [
    GasState(mu=0.0, T=1.0, B=1.0),
    GasState(mu=3.0, T=0.5, B=0.1),
    GasState(mu=2.0, T=1.0, B=0.05),
    GasState(mu=-2.0, T=0.3, B=2.0),
    GasState(mu=7.5, T=2.0, B=0.7),
    GasState(mu=1.0, T=0.2, B=0.0),
]


def relative(a, b):
    return abs(a - b) / abs(b)


def brute_force_landau_sum(k, x, a):
    count = int(math.ceil((x + 80.0) / a)) + 1
    levels = x - a * np.arange(1, count + 1)
    return fermi_integral(k, x) + 2.0 * float(np.sum(fermi_integral(k, levels)))


@pytest.mark.parametrize("k", [-0.5, 0.5])
@pytest.mark.parametrize(
    "x, a",
    [(0.0, 2.0), (5.0, 0.1), (5.0, 0.25), (5.0, 0.26), (-3.0, 1.0), (30.0, 3.0), (200.0, 1.0), (400.0, 25.0)],
)
def test_landau_sum_matches_direct_summation(k, x, a):
    assert relative(landau_sum(k, x, a), brute_force_landau_sum(k, x, a)) < 1e-9


def test_landau_sum_broadcasts():
    x = np.array([-1.0, 0.0, 10.0, 80.0])
    a = np.array([0.1, 1.0, 4.0, 0.5])
    values = landau_sum(0.5, x, a)
    assert values.shape == (4,)
    for xi, ai, value in zip(x, a, values):
        assert value == pytest.approx(landau_sum(0.5, float(xi), float(ai)), rel=1e-14)


def test_landau_sum_rejects_bad_input():
    with pytest.raises(UnsupportedOrderError):
        landau_sum(1.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        landau_sum(0.5, 0.0, 0.0)
    with pytest.raises(DomainError):
        landau_sum(0.5, math.nan, 1.0)


@pytest.mark.parametrize("state", STATES)
def test_density_is_derivative_of_pressure(state):
    step = 1e-4 * state.T
    difference = (
        gas_pressure(state.mu + step, state.T, state.B) - gas_pressure(state.mu - step, state.T, state.B)
    ) / (2.0 * step)
    assert relative(difference, landau_density(state)) < 1e-6


@pytest.mark.parametrize("state", STATES)
def test_dos_form_matches_landau_sum(state):
    assert relative(dos_pressure(state), landau_pressure(state)) < 1e-8


@pytest.mark.parametrize("state", [s for s in STATES if s.B > 0.0])
def test_momentum_form_matches_landau_sum(state):
    assert relative(momentum_pressure(state), landau_pressure(state)) < 1e-8
    assert relative(momentum_density(state), landau_density(state)) < 1e-8


def test_momentum_form_needs_field():
    with pytest.raises(DomainError):
        momentum_pressure(GasState(mu=0.0, T=1.0, B=0.0))


def test_weak_field_tends_to_nonmagnetic():
    mu, T = 1.0, 1.0
    assert relative(gas_pressure(mu, T, 1e-3), nonmagnetic_pressure(mu, T)) < 1e-5


@pytest.mark.parametrize("mu, T", [(1.0, 1.0), (-1.0, 0.5), (5.0, 1.0)])
def test_field_halvings_approach_nonmagnetic(mu, T):
    gaps = weak_field_gaps(mu, T, WEAK_FIELDS)
    ratios = gaps[1:] / gaps[:-1]
    # Leading correction is quadratic in B
    assert np.all(ratios < 0.5)
    assert gaps[-1] < 1e-3


@pytest.mark.parametrize("T, B", [(1.0, 0.0), (1.0, 1.0), (0.3, 2.0), (0.5, 0.05), (0.1, 10.0)])
def test_pressure_increasing_and_convex_in_mu(T, B):
    mus = np.linspace(-5.0, 10.0, 61)
    values = gas_pressure(mus, T, B)
    assert np.all(np.diff(values) > 0.0)
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    assert np.all(second >= -1e-9 * values[1:-1])
    scalar = [landau_pressure(GasState(mu=float(mu), T=T, B=B)) for mu in mus[::15]]
    np.testing.assert_allclose(scalar, values[::15], rtol=1e-14)


def test_nonmagnetic_branch():
    mu, T = 0.5, 0.8
    expected = PRESSURE_PREFACTOR * (2.0 / 3.0) * T**2.5 * fermi_integral(1.5, mu / T)
    assert gas_pressure(mu, T, 0.0) == pytest.approx(expected, rel=1e-14)


def test_lowest_landau_limit():
    beta = 1e8
    mu, T = 0.0, 0.5
    field = beta * (1.0 + beta) ** -0.4
    weighted = (1.0 + beta) ** -0.6 * gas_pressure(mu, T, field)
    assert relative(weighted, lll_pressure(mu, T)) < 1e-7


def test_lll_pressure_reference_value():
    # (1/π) I_{1/2}(0); the same point in the 1/(√2π²) normalization is smaller by √2π
    half = float(gamma(1.5)) * (1.0 - 2.0**-0.5) * float(zeta(1.5))
    value = lll_pressure(0.0, 1.0)
    assert value == pytest.approx(half / math.pi, rel=1e-10)
    assert value == pytest.approx(0.21584, abs=1e-5)
    assert value / (math.sqrt(2.0) * math.pi) == pytest.approx(0.04858, abs=1e-5)


def test_lll_pressure_rejects_bad_temperature():
    with pytest.raises(DomainError):
        lll_pressure(0.0, 0.0)


@pytest.mark.parametrize("B", [0.0, 0.5, 3.0])
def test_nondegenerate_regime(B):
    mu, T = -30.0, 1.0
    assert relative(gas_pressure(mu, T, B), nondegenerate_pressure(mu, T, B)) < 1e-10


def test_zero_temperature_closed_forms():
    assert zero_t_pressure(1.0, 0.0) == pytest.approx(4.0 / (15.0 * math.pi), rel=1e-14)
    expected = PRESSURE_PREFACTOR * (2.0 / 3.0) * (3.0**1.5 + 2.0)
    assert zero_t_pressure(3.0, 1.0) == pytest.approx(expected, rel=1e-14)
    assert zero_t_pressure(-1.0, 1.0) == 0.0


def test_low_temperature_tends_to_zero_temperature_form():
    pressure = landau_pressure(GasState(mu=3.0, T=0.01, B=1.0))
    assert relative(pressure, zero_t_pressure(3.0, 1.0)) < 1e-3


@pytest.mark.parametrize("mu, B", [(1.0, 5.0), (3.0, 1.0), (2.5, 0.3)])
def test_zero_temperature_limit_away_from_thresholds(mu, B):
    pressure = landau_pressure(GasState(mu=mu, T=1e-3, B=B))
    assert relative(pressure, zero_t_pressure(mu, B)) < 1e-3
    assert zero_t_pressure(1.0, 5.0) == pytest.approx(5.0 / (2.0 * math.pi) * 4.0 / 3.0, rel=1e-14)


def test_integrated_dos():
    assert integrated_dos(0.0, 1.0) == 0.0
    assert integrated_dos(1.0, 0.0) == pytest.approx(2.0 / (3.0 * math.pi), rel=1e-14)
    # Levels at 0 and 2 below ε = 3
    expected = PRESSURE_PREFACTOR * (math.sqrt(3.0) + 2.0)
    assert integrated_dos(3.0, 1.0) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        integrated_dos(-1.0, 1.0)


def test_degeneracy():
    assert degeneracy(0, 2.0) == pytest.approx(1.0 / math.pi)
    assert degeneracy(3, 2.0) == pytest.approx(2.0 / math.pi)


def test_landau_pressure_rejects_bad_state():
    with pytest.raises(DomainError):
        landau_pressure(GasState(mu=0.0, T=0.0, B=1.0))
    with pytest.raises(DomainError):
        landau_pressure(GasState(mu=0.0, T=1.0, B=-1.0))


def test_sandwich_holds_on_grid():
    for mu, T, B in itertools.product((-10.0, -1.0, 0.0, 1.0, 10.0), (0.05, 1.0, 10.0), (0.0, 1.0, 100.0)):
        state = GasState(mu=mu, T=T, B=B)
        assert pressure_bounds(state).contained, state
        assert density_bounds(state).contained, state


def test_bounds_report_terms():
    report = pressure_bounds(GasState(mu=1.0, T=1.0, B=2.0))
    assert set(report.terms) == {"field", "bulk", "thermal_tail"}
    assert report.terms["field"] == pytest.approx(2.0)
    assert report.lower == pytest.approx(PRESSURE_BOUND_CONSTANTS[0] * 3.0)


def test_frozen_constants_cover_calibration():
    states = [
        GasState(mu=mu, T=T, B=B)
        for mu, T, B in itertools.product(
            (-5.0, -1.0, 0.0, 0.5, 2.0, 10.0), (0.1, 1.0, 5.0), (0.0, 0.1, 1.0, 10.0)
        )
    ]
    calibration = calibrate_bounds(states)
    assert calibration.samples == 72
    assert PRESSURE_BOUND_CONSTANTS[0] <= calibration.pressure_lower
    assert PRESSURE_BOUND_CONSTANTS[1] >= calibration.pressure_upper
    assert DENSITY_BOUND_CONSTANTS[0] <= calibration.density_lower
    assert DENSITY_BOUND_CONSTANTS[1] >= calibration.density_upper


def test_calibration_needs_degenerate_states():
    with pytest.raises(DomainError):
        calibrate_bounds([GasState(mu=-1.0, T=1.0, B=1.0)])


@pytest.mark.parametrize(
    "gas",
    [MagneticGas(T=1.0, B=1.0), NonmagneticGas(T=0.5, weight=0.7), LowestLandauGas(T=2.0)],
)
def test_inverse_density_round_trip(gas):
    mus = np.array([-3.0, 0.0, 2.0, 25.0])
    recovered = gas.inverse_density(gas.density(mus))
    np.testing.assert_allclose(recovered, mus, rtol=1e-9, atol=1e-9)


def test_inverse_density_of_zero():
    gas = MagneticGas(T=1.0, B=1.0)
    assert gas.inverse_density(0.0) == -math.inf
    assert gas.free_energy(0.0) == 0.0
    with pytest.raises(DomainError):
        gas.inverse_density(-1.0)


def test_free_energy_is_legendre_transform():
    gas = NonmagneticGas(T=1.0)
    mu = 1.3
    rho = float(gas.density(mu))
    assert gas.free_energy(rho) == pytest.approx(mu * rho - float(gas.pressure(mu)), rel=1e-10)
    # Midpoint convexity
    a, b = 0.05, 0.8
    assert gas.free_energy(0.5 * (a + b)) <= 0.5 * (gas.free_energy(a) + gas.free_energy(b))


def test_weighted_gas_scales_pressure():
    plain = MagneticGas(T=1.0, B=2.0)
    weighted = MagneticGas(T=1.0, B=2.0, weight=0.25)
    assert weighted.pressure(1.0) == pytest.approx(0.25 * plain.pressure(1.0), rel=1e-14)


def test_gas_validation():
    with pytest.raises(ValidationError):
        MagneticGas(T=0.0, B=1.0)
    with pytest.raises(ValidationError):
        MagneticGas(T=1.0, B=0.0)
    with pytest.raises(ValidationError):
        NonmagneticGas(T=1.0, weight=0.0)


def test_vectorized_density_matches_scalar():
    mus = np.linspace(-2.0, 5.0, 5)
    values = gas_density(mus, 0.7, 0.3)
    for mu, value in zip(mus, values):
        assert value == pytest.approx(gas_density(float(mu), 0.7, 0.3), rel=1e-14)
