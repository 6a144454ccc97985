"""
Equation of state of the free electron gas in a homogeneous magnetic field.

Normalization: one constant, PRESSURE_PREFACTOR = 1/π, is used for every
form of the pressure so that the Landau-level sum, the momentum integral,
the integrated density of states and the zero-temperature closed form agree
identically:

    P_{T,B}(μ)  = (B T^{3/2} / π) L_{1/2}(μ/T, 2B/T)
    P'_{T,B}(μ) = (B T^{1/2} / 2π) L_{-1/2}(μ/T, 2B/T)
    L_k(x, a)   = I_k(x) + 2 Σ_{ν≥1} I_k(x - aν)

At B = 0 the Landau sum is replaced by its continuum limit
(2 / 3π) T^{5/2} I_{3/2}(μ/T).
"""

import logging
import math
from abc import abstractmethod
from functools import lru_cache
from typing import Iterable, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import quad
from scipy.special import bernoulli, gamma

from src.errors import BracketError, DomainError, UnsupportedOrderError
from src.fermi import (
    FermiOrder,
    fermi_function,
    fermi_integral,
    fermi_integral_derivative,
    fermi_order,
)
from src.models import BoundsCalibration, BoundsReport, GasState

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

PRESSURE_PREFACTOR = 1.0 / math.pi

# Landau-sum strategy
WEAK_FIELD_SPACING = 0.25
EULER_MACLAURIN_TERMS = 4
DEEP_LEVEL_EDGE = 50.0
DEEP_LEVEL_SPACING_FACTOR = 20.0
TAIL_DEPTH = 40.0

# Sandwich constants (lower, upper) for the pressure and the density.
# Derived from I_{1/2}(y) <= (2/3) y^{3/2} + y^{1/2} + Γ(3/2) (y >= 0),
# I_k(y) <= Γ(k+1) e^y (y <= 0) and P_T >= P_0, then halved/doubled.
PRESSURE_BOUND_CONSTANTS = (0.0075, 10.0)
DENSITY_BOUND_CONSTANTS = (0.01, 10.0)

BRACKET_STEPS = 100
BISECTION_STEPS = 120


@lru_cache(maxsize=1)
def _euler_maclaurin_weights() -> Tuple[float, ...]:
    """B_{2j} / (2j)! for j = 1..EULER_MACLAURIN_TERMS."""
    numbers = bernoulli(2 * EULER_MACLAURIN_TERMS)
    return tuple(
        float(numbers[2 * j]) / math.factorial(2 * j)
        for j in range(1, EULER_MACLAURIN_TERMS + 1)
    )


def landau_sum(k: float, x: ArrayLike, a: ArrayLike) -> ArrayLike:
    """
    Landau bracket L_k(x, a) = I_k(x) + 2 Σ_{ν≥1} I_k(x - aν).

    Args:
        k: -1/2 (density) or 1/2 (pressure)
        x: Reduced chemical potential μ/T
        a: Reduced level spacing 2B/T, strictly positive

    Returns:
        L_k(x, a), broadcast over x and a
    """
    order = fermi_order(k)
    if order not in (FermiOrder.MINUS_HALF, FermiOrder.HALF):
        raise UnsupportedOrderError(f"Landau sums are defined for k = ±1/2, got k={k!r}")

    x_values, a_values = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(a, dtype=float)
    )
    if not (np.all(np.isfinite(x_values)) and np.all(np.isfinite(a_values))):
        raise DomainError("Landau sum arguments must be finite")
    if np.any(a_values <= 0.0):
        raise DomainError("Landau level spacing must be positive; use the B = 0 branch")

    flat_x = x_values.ravel()
    flat_a = a_values.ravel()
    out = np.empty(flat_x.shape)

    weak = flat_a <= WEAK_FIELD_SPACING
    if weak.any():
        out[weak] = _weak_field_sum(order.value, flat_x[weak], flat_a[weak])
    if (~weak).any():
        out[~weak] = _level_sum(order.value, flat_x[~weak], flat_a[~weak])

    out = out.reshape(x_values.shape)
    if out.ndim == 0:
        return float(out)
    return out


def _weak_field_sum(k: float, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Euler-Maclaurin summation over all levels, accurate for small spacing a."""
    total = 2.0 * fermi_integral(k + 1.0, x) / (a * (k + 1.0))
    for j, weight in enumerate(_euler_maclaurin_weights(), start=1):
        m = 2 * j - 1
        total = total + 2.0 * weight * a**m * fermi_integral_derivative(k, x, m)
    return total


def _deep_block(k: float, x: np.ndarray, a: np.ndarray, last: np.ndarray) -> np.ndarray:
    """Σ_{ν=0}^{last} I_k(x - aν) for levels deep below the chemical potential."""
    y_last = x - a * last
    total = (fermi_integral(k + 1.0, x) - fermi_integral(k + 1.0, y_last)) / (a * (k + 1.0))
    total = total + 0.5 * (fermi_integral(k, x) + fermi_integral(k, y_last))
    for j, weight in enumerate(_euler_maclaurin_weights(), start=1):
        m = 2 * j - 1
        total = total + weight * a**m * (
            fermi_integral_derivative(k, x, m) - fermi_integral_derivative(k, y_last, m)
        )
    return total


def _level_sum(k: float, x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """
    Hybrid summation for well separated levels.

    Levels with x - aν >= max(DEEP_LEVEL_EDGE, 20a) are summed in closed form,
    the rest level by level down to TAIL_DEPTH below min(x, 0); the neglected
    tail is below e^-40 of the total.
    """
    deep_edge = np.maximum(DEEP_LEVEL_EDGE, DEEP_LEVEL_SPACING_FACTOR * a)
    deep = x >= deep_edge + a
    last_deep = np.where(deep, np.floor((x - deep_edge) / a), 0.0)

    total = np.asarray(fermi_integral(k, x), dtype=float).copy()
    if deep.any():
        block = _deep_block(k, x[deep], a[deep], last_deep[deep])
        total[deep] = 2.0 * block - total[deep]

    y_floor = np.minimum(x, 0.0) - TAIL_DEPTH
    last_level = np.floor((x - y_floor) / a)
    count = np.maximum(last_level - last_deep, 0.0).astype(int)
    width = int(count.max()) if count.size else 0
    if width > 0:
        offsets = np.arange(1, width + 1, dtype=float)
        active = offsets[None, :] <= count[:, None]
        levels = x[:, None] - a[:, None] * (last_deep[:, None] + offsets[None, :])
        values = np.zeros(levels.shape)
        values[active] = fermi_integral(k, levels[active])
        total = total + 2.0 * values.sum(axis=1)
    return total


# ---------------------------------------------------------------------------
# Vectorized pressure and density
# ---------------------------------------------------------------------------


def magnetic_pressure(mu: ArrayLike, T: float, B: float) -> ArrayLike:
    """P_{T,B}(μ) for B > 0, vectorized over μ."""
    return PRESSURE_PREFACTOR * B * T**1.5 * landau_sum(0.5, np.asarray(mu) / T, 2.0 * B / T)


def magnetic_density(mu: ArrayLike, T: float, B: float) -> ArrayLike:
    """P'_{T,B}(μ) for B > 0, vectorized over μ."""
    return 0.5 * PRESSURE_PREFACTOR * B * math.sqrt(T) * landau_sum(
        -0.5, np.asarray(mu) / T, 2.0 * B / T
    )


def nonmagnetic_pressure(mu: ArrayLike, T: float) -> ArrayLike:
    """B = 0 pressure (2 / 3π) T^{5/2} I_{3/2}(μ/T)."""
    return PRESSURE_PREFACTOR * (2.0 / 3.0) * T**2.5 * fermi_integral(1.5, np.asarray(mu) / T)


def nonmagnetic_density(mu: ArrayLike, T: float) -> ArrayLike:
    """B = 0 density (1/π) T^{3/2} I_{1/2}(μ/T)."""
    return PRESSURE_PREFACTOR * T**1.5 * fermi_integral(0.5, np.asarray(mu) / T)


def lowest_landau_pressure(mu: ArrayLike, T: float) -> ArrayLike:
    """Lowest-Landau-level pressure (1/π) T^{3/2} I_{1/2}(μ/T), vectorized."""
    return PRESSURE_PREFACTOR * T**1.5 * fermi_integral(0.5, np.asarray(mu) / T)


def lowest_landau_density(mu: ArrayLike, T: float) -> ArrayLike:
    """Derivative of lowest_landau_pressure in μ."""
    return 0.5 * PRESSURE_PREFACTOR * math.sqrt(T) * fermi_integral(-0.5, np.asarray(mu) / T)


def gas_pressure(mu: ArrayLike, T: float, B: float) -> ArrayLike:
    """P_{T,B}(μ) for any B >= 0."""
    if B == 0.0:
        return nonmagnetic_pressure(mu, T)
    return magnetic_pressure(mu, T, B)


def gas_density(mu: ArrayLike, T: float, B: float) -> ArrayLike:
    """P'_{T,B}(μ) for any B >= 0."""
    if B == 0.0:
        return nonmagnetic_density(mu, T)
    return magnetic_density(mu, T, B)


# ---------------------------------------------------------------------------
# Gas models used inside functionals
# ---------------------------------------------------------------------------


class FreeGas(BaseModel):
    """
    A weighted free-gas pressure μ ↦ weight * P(μ) at temperature T.

    Subclasses provide pressure and density; the Legendre side (inverse
    density and free energy) is shared.
    """

    model_config = ConfigDict(frozen=True)

    T: float = Field(..., gt=0, description="Temperature")
    weight: float = Field(1.0, gt=0, description="Constant prefactor of the pressure")

    @abstractmethod
    def pressure(self, mu: ArrayLike) -> ArrayLike:
        """Weighted pressure at chemical potential mu."""

    @abstractmethod
    def density(self, mu: ArrayLike) -> ArrayLike:
        """Derivative of pressure in mu."""

    def inverse_density(self, rho: ArrayLike) -> ArrayLike:
        """
        Chemical potential μ with density(μ) = rho, by safeguarded bisection.

        Zero density maps to -inf.
        """
        values = np.asarray(rho, dtype=float)
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise DomainError("Density must be finite and nonnegative")

        flat = values.ravel()
        out = np.full(flat.shape, -np.inf)
        positive = flat > 0.0
        if positive.any():
            out[positive] = self._bisect(flat[positive])

        out = out.reshape(values.shape)
        if out.ndim == 0:
            return float(out)
        return out

    def _bisect(self, target: np.ndarray) -> np.ndarray:
        lo = np.full(target.shape, -self.T)
        hi = np.full(target.shape, self.T)
        for _ in range(BRACKET_STEPS):
            lo_high = self.density(lo) > target
            hi_low = self.density(hi) < target
            if not (lo_high.any() or hi_low.any()):
                break
            lo = np.where(lo_high, 2.0 * lo, lo)
            hi = np.where(hi_low, 2.0 * hi, hi)
        else:
            raise BracketError(
                "Could not bracket the chemical potential for the requested densities",
                bracket=(float(lo.min()), float(hi.max())),
            )

        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            above = self.density(mid) >= target
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))):
                break
        return 0.5 * (lo + hi)

    def free_energy(self, rho: ArrayLike) -> ArrayLike:
        """Legendre transform f(ρ) = sup_μ {μρ - pressure(μ)}, with f(0) = 0."""
        values = np.asarray(rho, dtype=float)
        mu = np.asarray(self.inverse_density(values), dtype=float)
        out = np.zeros(values.shape)
        positive = values > 0.0
        if np.any(positive):
            out[positive] = mu[positive] * values[positive] - np.asarray(
                self.pressure(mu[positive])
            )
        if out.ndim == 0:
            return float(out)
        return out


class MagneticGas(FreeGas):
    """Full Landau-level gas at field B > 0."""

    B: float = Field(..., gt=0, description="Magnetic field strength")

    def pressure(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * magnetic_pressure(mu, self.T, self.B)

    def density(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * magnetic_density(mu, self.T, self.B)


class NonmagneticGas(FreeGas):
    """Zero-field gas."""

    def pressure(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * nonmagnetic_pressure(mu, self.T)

    def density(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * nonmagnetic_density(mu, self.T)


class LowestLandauGas(FreeGas):
    """Gas confined to the lowest Landau level (infinite-field limit)."""

    def pressure(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * lowest_landau_pressure(mu, self.T)

    def density(self, mu: ArrayLike) -> ArrayLike:
        return self.weight * lowest_landau_density(mu, self.T)


# ---------------------------------------------------------------------------
# State-level operations
# ---------------------------------------------------------------------------


def _check_state(state: GasState) -> None:
    if not math.isfinite(state.mu):
        raise DomainError(f"Chemical potential must be finite, got {state.mu}")
    if not state.T > 0.0:
        raise DomainError(f"Temperature must be positive, got T={state.T}")
    if not state.B >= 0.0:
        raise DomainError(f"Field must be nonnegative, got B={state.B}")


def landau_pressure(state: GasState) -> float:
    """
    Free-gas pressure P_{T,B}(μ).

    Raises:
        DomainError: If T <= 0 or B < 0 (use zero_t_pressure at T = 0)
    """
    _check_state(state)
    return float(gas_pressure(state.mu, state.T, state.B))


def landau_density(state: GasState) -> float:
    """Free-gas density P'_{T,B}(μ)."""
    _check_state(state)
    return float(gas_density(state.mu, state.T, state.B))


def lll_pressure(mu: float, T: float) -> float:
    """
    Lowest-Landau-level pressure (T^{3/2}/π) I_{1/2}(μ/T), the β → ∞ limit of
    (1+β)^{-3/5} P_{T̃,B̃}.

    With PRESSURE_PREFACTOR = 1/π, lll_pressure(0, 1) = I_{1/2}(0)/π ≈ 0.21584;
    a 1/(√2π²) prefactor would give 0.04858 for the same point, smaller by √2π.
    """
    if not T > 0.0:
        raise DomainError(f"Temperature must be positive, got T={T}")
    if not math.isfinite(mu):
        raise DomainError(f"Chemical potential must be finite, got {mu}")
    return float(lowest_landau_pressure(mu, T))


def degeneracy(nu: int, B: float) -> float:
    """Landau states per unit transverse area: B/2π for ν = 0, B/π above."""
    return B / (2.0 * math.pi) if nu == 0 else B / math.pi


def _level_count(energy: float, B: float) -> int:
    """Number of Landau levels 2Bν strictly below or at energy."""
    if energy < 0.0:
        return 0
    return int(math.floor(energy / (2.0 * B))) + 1


def integrated_dos(eps: float, B: float) -> float:
    """
    Integrated density of states G(ε) = Σ_ν 2 d_ν(B) |ε - 2Bν|₊^{1/2}.

    At B = 0 this is the continuum limit (2 / 3π) ε^{3/2}.
    """
    if eps < 0.0 or B < 0.0 or not (math.isfinite(eps) and math.isfinite(B)):
        raise DomainError(f"integrated_dos needs eps >= 0 and B >= 0, got eps={eps}, B={B}")
    if B == 0.0:
        return PRESSURE_PREFACTOR * (2.0 / 3.0) * eps**1.5
    levels = np.arange(_level_count(eps, B), dtype=float)
    gaps = np.sqrt(np.maximum(eps - 2.0 * B * levels, 0.0))
    weights = np.where(levels == 0, 1.0, 2.0)
    return float(PRESSURE_PREFACTOR * B * np.dot(weights, gaps))


def zero_t_pressure(mu: float, B: float) -> float:
    """T = 0 pressure Σ_ν d_ν (4/3) |μ - 2Bν|₊^{3/2} (continuum (4/15π) μ₊^{5/2} at B = 0)."""
    if B < 0.0 or not (math.isfinite(mu) and math.isfinite(B)):
        raise DomainError(f"zero_t_pressure needs finite mu and B >= 0, got mu={mu}, B={B}")
    if mu <= 0.0:
        return 0.0
    if B == 0.0:
        return PRESSURE_PREFACTOR * (4.0 / 15.0) * mu**2.5
    levels = np.arange(_level_count(mu, B), dtype=float)
    gaps = np.maximum(mu - 2.0 * B * levels, 0.0) ** 1.5
    weights = np.where(levels == 0, 1.0, 2.0)
    return float(PRESSURE_PREFACTOR * (2.0 / 3.0) * B * np.dot(weights, gaps))


def dos_pressure(state: GasState) -> float:
    """
    Pressure as ∫ G(ε) / (exp((ε - μ)/T) + 1) dε by adaptive quadrature.

    Independent of the Landau-sum machinery; used to cross-check it.
    """
    _check_state(state)
    mu, T, B = state.mu, state.T, state.B
    upper = max(mu, 0.0) + 60.0 * T

    def integrand(eps: float) -> float:
        return integrated_dos(eps, B) * float(fermi_function((eps - mu) / T))

    if B == 0.0:
        breaks = [0.0, upper]
    else:
        thresholds = 2.0 * B * np.arange(_level_count(upper, B))
        breaks = sorted(set(thresholds.tolist()) | {upper})
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        value, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += value
    return total


def _momentum_levels(state: GasState) -> List[int]:
    if state.B <= 0.0:
        raise DomainError("The momentum-space form needs B > 0")
    return list(range(_level_count(state.mu + 60.0 * state.T, state.B)))


def momentum_pressure(state: GasState) -> float:
    """
    Pressure as Σ_ν d_ν T ∫ ln(1 + exp(-(p² + 2Bν - μ)/T)) dp by quadrature.
    """
    _check_state(state)
    mu, T, B = state.mu, state.T, state.B
    total = 0.0
    for nu in _momentum_levels(state):
        excess = mu - 2.0 * B * nu
        edge = math.sqrt(max(excess, 0.0))
        cutoff = math.sqrt(max(excess, 0.0) + 60.0 * T)

        def integrand(p: float) -> float:
            return T * float(np.logaddexp(0.0, (excess - p * p) / T))

        inner, _ = quad(integrand, 0.0, edge, epsabs=0.0, epsrel=1e-12) if edge > 0 else (0.0, 0.0)
        outer, _ = quad(integrand, edge, cutoff, epsabs=0.0, epsrel=1e-12)
        total += degeneracy(nu, B) * 2.0 * (inner + outer)
    return total


def momentum_density(state: GasState) -> float:
    """Density as Σ_ν d_ν ∫ 1 / (exp((p² + 2Bν - μ)/T) + 1) dp by quadrature."""
    _check_state(state)
    mu, T, B = state.mu, state.T, state.B
    total = 0.0
    for nu in _momentum_levels(state):
        excess = mu - 2.0 * B * nu
        edge = math.sqrt(max(excess, 0.0))
        cutoff = math.sqrt(max(excess, 0.0) + 60.0 * T)

        def integrand(p: float) -> float:
            return float(fermi_function((p * p - excess) / T))

        inner, _ = quad(integrand, 0.0, edge, epsabs=0.0, epsrel=1e-12) if edge > 0 else (0.0, 0.0)
        outer, _ = quad(integrand, edge, cutoff, epsabs=0.0, epsrel=1e-12)
        total += degeneracy(nu, B) * 2.0 * (inner + outer)
    return total


# ---------------------------------------------------------------------------
# Two-sided estimates
# ---------------------------------------------------------------------------


def _pressure_terms(state: GasState) -> Tuple[float, float, float]:
    mu_plus = max(state.mu, 0.0)
    field = state.B * mu_plus**1.5
    bulk = mu_plus**2.5
    tail = math.exp(-abs(state.mu) / state.T) * (state.B * state.T**1.5 + state.T**2.5)
    return field, bulk, tail


def _density_terms(state: GasState) -> Tuple[float, float, float]:
    mu_plus = max(state.mu, 0.0)
    field = state.B * mu_plus**0.5
    bulk = mu_plus**1.5
    tail = math.exp(-abs(state.mu) / state.T) * (state.B * state.T**0.5 + state.T**1.5)
    return field, bulk, tail


def _bounds_report(value: float, terms: Tuple[float, float, float], constants) -> BoundsReport:
    field, bulk, tail = terms
    lower = constants[0] * (field + bulk)
    upper = constants[1] * (field + bulk + tail)
    return BoundsReport(
        lower=lower,
        value=value,
        upper=upper,
        terms={"field": field, "bulk": bulk, "thermal_tail": tail},
        contained=bool(lower <= value <= upper),
    )


def pressure_bounds(state: GasState) -> BoundsReport:
    """
    Two-sided estimate c(B|μ|₊^{3/2} + |μ|₊^{5/2}) <= P <= C(... + e^{-|μ|/T}(B T^{3/2} + T^{5/2})).
    """
    value = landau_pressure(state)
    return _bounds_report(value, _pressure_terms(state), PRESSURE_BOUND_CONSTANTS)


def density_bounds(state: GasState) -> BoundsReport:
    """
    Two-sided estimate c'(B|μ|₊^{1/2} + |μ|₊^{3/2}) <= P' <= C'(... + e^{-|μ|/T}(B T^{1/2} + T^{3/2})).
    """
    value = landau_density(state)
    return _bounds_report(value, _density_terms(state), DENSITY_BOUND_CONSTANTS)


def calibrate_bounds(states: Iterable[GasState], safety: float = 2.0) -> BoundsCalibration:
    """
    Empirical sandwich constants over a reference set of states.

    The extreme ratios value / term-sum are divided (lower) or multiplied
    (upper) by the safety factor. The frozen constants in this module must
    lie outside the calibrated ones.
    """
    pressure_low, pressure_high = [], []
    density_low, density_high = [], []
    count = 0
    for state in states:
        count += 1
        p = landau_pressure(state)
        field, bulk, tail = _pressure_terms(state)
        if field + bulk > 0.0:
            pressure_low.append(p / (field + bulk))
        if field + bulk + tail > 0.0 and p > 0.0:
            pressure_high.append(p / (field + bulk + tail))

        n = landau_density(state)
        field, bulk, tail = _density_terms(state)
        if field + bulk > 0.0:
            density_low.append(n / (field + bulk))
        if field + bulk + tail > 0.0 and n > 0.0:
            density_high.append(n / (field + bulk + tail))

    if not (pressure_low and pressure_high and density_low and density_high):
        raise DomainError("Calibration needs states with both positive and negative mu")

    calibration = BoundsCalibration(
        pressure_lower=min(pressure_low) / safety,
        pressure_upper=max(pressure_high) * safety,
        density_lower=min(density_low) / safety,
        density_upper=max(density_high) * safety,
        samples=count,
    )
    logger.debug(f"Calibrated sandwich constants over {count} states: {calibration}")
    return calibration


def nondegenerate_pressure(mu: float, T: float, B: float) -> float:
    """Leading Boltzmann form of the pressure, for μ/T → -∞ checks."""
    if B == 0.0:
        return PRESSURE_PREFACTOR * (2.0 / 3.0) * T**2.5 * float(gamma(2.5)) * math.exp(mu / T)
    a = 2.0 * B / T
    return (
        PRESSURE_PREFACTOR
        * B
        * T**1.5
        * float(gamma(1.5))
        * math.exp(mu / T)
        / math.tanh(a / 2.0)
    )
