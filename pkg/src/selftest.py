"""
Self-test battery.

Each check is registered with a name, the module it exercises, a
description and a default tolerance, and returns one measured number.
A check passes when measured <= tolerance * tolerance_scale, so a scale of
zero turns every check with a nonzero measurement into a failure.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import quad
from scipy.special import gamma, zeta

from src.eos import (
    density_bounds,
    dos_pressure,
    gas_density,
    gas_pressure,
    landau_pressure,
    lll_pressure,
    momentum_pressure,
    pressure_bounds,
    zero_t_pressure,
)
from src.errors import MTFError
from src.fermi import fermi_integral, fermi_integral_prime
from src.fields import (
    SOBOLEV_COULOMB_BOUND,
    DensityField,
    Mollifier,
    PotentialField,
    RadialGrid,
    coulomb_l6_norm,
    coulomb_potential,
    coulomb_potential_at,
    hartree_energy,
    lp_norm,
    mollify,
    radial_laplacian,
)
from src.models import CheckResult, GasState, PhysicalParams
from src.mtf import (
    build_scaled_problem,
    eval_free_energy_functional,
    eval_pressure_functional,
    free_energy_derivative,
    minimizer_bounds,
    scf_solve,
    tf_residual,
)
from src.scaling import limit_scan, pressure_rescale_check, scale_density, scale_params, unscale_density

logger = logging.getLogger(__name__)

SEED = 20240601


class Check(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    module: str
    description: str
    tolerance: float
    run: Callable[[], float]


CHECKS: List[Check] = []


def register(name: str, module: str, description: str, tolerance: float):
    """Decorator adding a measurement function to the battery."""

    def decorator(func: Callable[[], float]) -> Callable[[], float]:
        CHECKS.append(Check(name=name, module=module, description=description, tolerance=tolerance, run=func))
        return func

    return decorator


# ---------------------------------------------------------------------------
# Oracles and shared fixtures
# ---------------------------------------------------------------------------


def quad_fermi_integral(k: float, x: float) -> float:
    """I_k(x) by adaptive quadrature in t = sqrt(y), split at the Fermi edge."""

    def integrand(t: float) -> float:
        return 2.0 * t ** (2.0 * k + 1.0) / (math.exp(min(t * t - x, 700.0)) + 1.0)

    edge = math.sqrt(max(x, 0.0))
    upper = math.sqrt(max(x, 0.0) + 80.0)
    total = 0.0
    for lo, hi in ((0.0, edge), (edge, upper)):
        if hi > lo:
            value, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
            total += value
    return total


def ball_grid(m: int = 200, extent: float = 3.0) -> RadialGrid:
    """Linear grid with a shell edge exactly at r = 1."""
    h = 2.0 / (2 * m + 1)
    n = int(round(extent / h)) + 1
    return RadialGrid.from_nodes(h * np.arange(n))


def uniform_ball(grid: RadialGrid, charge: float = 1.0, radius: float = 1.0) -> DensityField:
    """Uniform ball density on the shells whose outer edge is inside the radius."""
    inside = grid.edges[1:] <= radius * (1.0 + 1e-12)
    values = np.where(inside, 3.0 * charge / (4.0 * math.pi * radius**3), 0.0)
    return DensityField(grid=grid, values=values)


def density_family(grid: RadialGrid) -> List[DensityField]:
    """Balls, Gaussians and shells used by the Coulomb checks."""
    r = grid.nodes
    profiles = [
        np.where(r <= 1.0, 1.0, 0.0),
        np.where(r <= 0.5, 1.0, 0.0),
        np.where(r <= 1.5, 1.0, 0.0),
        np.exp(-(r**2)),
        np.exp(-4.0 * r**2),
        np.exp(-0.5 * r**2),
        np.where((r >= 0.5) & (r <= 1.0), 1.0, 0.0),
        np.where((r >= 1.0) & (r <= 1.5), 1.0, 0.0),
        np.exp(-r) * (r <= 2.5),
        (1.0 - r**2).clip(min=0.0) ** 2,
    ]
    return [DensityField(grid=grid, values=profile) for profile in profiles]


@lru_cache(maxsize=1)
def reference_solve():
    """A small converged solve shared by the solver checks."""
    prob = build_scaled_problem(0.0, 0.5, beta=1.0, z=1.0, n=200)
    report = scf_solve(prob, damping=0.5, tol=1e-9, max_iter=2000, anderson_depth=5)
    return prob, report


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# fermi
# ---------------------------------------------------------------------------


@register("fermi_quadrature", "fermi", "I_k(x) against adaptive quadrature at 30 points", 1e-10)
def check_fermi_quadrature() -> float:
    rng = np.random.default_rng(SEED)
    orders = (-0.5, 0.5, 1.0, 1.5)
    worst = 0.0
    for _ in range(30):
        k = float(rng.choice(orders))
        x = float(rng.uniform(-30.0, 60.0))
        worst = max(worst, _relative(fermi_integral(k, x), quad_fermi_integral(k, x)))
    return worst


@register("fermi_anchors", "fermi", "I_1(0) = π²/12 and I_k(0) = Γ(k+1) η(k+1)", 1e-10)
def check_fermi_anchors() -> float:
    worst = _relative(fermi_integral(1.0, 0.0), math.pi**2 / 12.0)
    for k in (-0.5, 0.5, 1.5):
        eta = (1.0 - 2.0 ** (-k)) * float(zeta(k + 1.0))
        worst = max(worst, _relative(fermi_integral(k, 0.0), float(gamma(k + 1.0)) * eta))
    return worst


@register("fermi_asymptotic", "fermi", "Sommerfeld regime against quadrature at x = 50, 100, 400", 1e-10)
def check_fermi_asymptotic() -> float:
    worst = 0.0
    for k in (-0.5, 0.5, 1.5):
        for x in (50.0, 100.0, 400.0):
            worst = max(worst, _relative(fermi_integral(k, x), quad_fermi_integral(k, x)))
    return worst


FERMI_GRID = np.arange(-50.0, 100.25, 0.25)


@register("fermi_monotone", "fermi", "Non-increasing steps of I_k on a uniform x-grid over [-50, 100]", 0.0)
def check_fermi_monotone() -> float:
    return float(sum(np.count_nonzero(np.diff(fermi_integral(k, FERMI_GRID)) <= 0.0) for k in (-0.5, 0.5, 1.0, 1.5)))


@register("fermi_convex", "fermi", "Worst negative second difference of I_k (k >= 1/2), relative to I_k", 1e-12)
def check_fermi_convex() -> float:
    worst = 0.0
    for k in (0.5, 1.0, 1.5):
        values = fermi_integral(k, FERMI_GRID)
        second = values[2:] - 2.0 * values[1:-1] + values[:-2]
        worst = max(worst, float(np.max(-second / values[1:-1])))
    return worst


@register("fermi_derivative", "fermi", "k I_{k-1} against a central difference of I_k at six arguments", 1e-6)
def check_fermi_derivative() -> float:
    worst = 0.0
    for k in (0.5, 1.5):
        for x in (-20.0, -1.0, 0.0, 1.0, 20.0, 100.0):
            step = 1e-5 * max(1.0, abs(x))
            difference = (fermi_integral(k, x + step) - fermi_integral(k, x - step)) / (2.0 * step)
            worst = max(worst, abs(fermi_integral_prime(k, x) - difference) / max(1.0, fermi_integral(k, x)))
    return worst


@register("fermi_nondegenerate", "fermi", "|I_k(x) / (Γ(k+1) e^x) - 1| at x = -30", 1e-3)
def check_fermi_nondegenerate() -> float:
    x = -30.0
    return max(abs(fermi_integral(k, x) / (float(gamma(k + 1.0)) * math.exp(x)) - 1.0) for k in (-0.5, 0.5, 1.0, 1.5))


@register("fermi_degenerate", "fermi", "|I_k(x) / (x^{k+1} / (k+1)) - 1| at x = 400", 1e-2)
def check_fermi_degenerate() -> float:
    x = 400.0
    return max(abs(fermi_integral(k, x) / (x ** (k + 1.0) / (k + 1.0)) - 1.0) for k in (-0.5, 0.5, 1.0, 1.5))


# ---------------------------------------------------------------------------
# eos
# ---------------------------------------------------------------------------


def _random_states(count: int, seed: int) -> List[GasState]:
    rng = np.random.default_rng(seed)
    return [
        GasState(
            mu=float(rng.uniform(-5.0, 10.0)),
            T=float(10.0 ** rng.uniform(-1.0, 0.5)),
            B=float(10.0 ** rng.uniform(-2.0, 1.0)),
        )
        for _ in range(count)
    ]


@register("eos_thermodynamic", "eos", "P' against a central difference of P on 20 states", 1e-6)
def check_thermodynamic_consistency() -> float:
    worst = 0.0
    for state in _random_states(20, SEED):
        step = 1e-4 * state.T
        difference = (
            gas_pressure(state.mu + step, state.T, state.B) - gas_pressure(state.mu - step, state.T, state.B)
        ) / (2.0 * step)
        worst = max(worst, _relative(difference, gas_density(state.mu, state.T, state.B)))
    return worst


@register("eos_dos_form", "eos", "Landau sum against the integrated-DOS quadrature on 10 states", 1e-8)
def check_dos_form() -> float:
    return max(_relative(landau_pressure(s), dos_pressure(s)) for s in _random_states(10, SEED + 1))


@register("eos_momentum_form", "eos", "Landau sum against the momentum-space quadrature on 5 states", 1e-8)
def check_momentum_form() -> float:
    return max(_relative(landau_pressure(s), momentum_pressure(s)) for s in _random_states(5, SEED + 2))


@register("eos_sandwich", "eos", "Worst bound ratio of the two-sided estimates on a 125-point grid", 1.0)
def check_sandwich() -> float:
    worst = 0.0
    for mu in (-10.0, -1.0, 0.0, 1.0, 10.0):
        for T in (0.05, 0.3, 1.0, 3.0, 10.0):
            for B in (0.0, 0.1, 1.0, 10.0, 100.0):
                state = GasState(mu=mu, T=T, B=B)
                for report in (pressure_bounds(state), density_bounds(state)):
                    ratios = [report.value / report.upper]
                    if report.lower > 0.0:
                        ratios.append(report.lower / report.value)
                    worst = max(worst, *ratios)
    return worst


@register("eos_lowest_landau", "eos", "Weighted pressure at β = 1e8 against the lowest-Landau-level limit", 1e-6)
def check_lowest_landau() -> float:
    beta = 1e8
    weight = (1.0 + beta) ** (-0.6)
    field = beta * (1.0 + beta) ** (-0.4)
    worst = 0.0
    for mu in (-2.0, 0.0, 3.0):
        worst = max(worst, _relative(weight * gas_pressure(mu, 0.5, field), lll_pressure(mu, 0.5)))
    return worst


EOS_MU_GRID = np.arange(-5.0, 10.25, 0.25)
EOS_SHAPE_STATES = ((1.0, 0.0), (1.0, 1.0), (0.3, 2.0), (0.5, 0.05))


@register("eos_monotone_convex", "eos", "Worst relative first or second μ-difference of P below zero", 1e-9)
def check_monotone_convex() -> float:
    worst = 0.0
    for T, B in EOS_SHAPE_STATES:
        values = gas_pressure(EOS_MU_GRID, T, B)
        first = np.diff(values) / values[:-1]
        second = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / values[1:-1]
        worst = max(worst, float(np.max(-first)), float(np.max(-second)))
    return worst


def weak_field_gaps(mu: float, T: float, fields: Sequence[float]) -> np.ndarray:
    """|P_{T,B}(μ) / P_{T,0}(μ) - 1| along a sequence of fields."""
    reference = float(gas_pressure(mu, T, 0.0))
    return np.array([abs(float(gas_pressure(mu, T, B)) / reference - 1.0) for B in fields])


WEAK_FIELDS = 0.25 * 0.5 ** np.arange(6)


@register("eos_weak_field", "eos", "Largest gap ratio to the B = 0 branch under successive halvings of B", 0.5)
def check_weak_field() -> float:
    worst = 0.0
    for mu, T in ((1.0, 1.0), (-1.0, 0.5)):
        gaps = weak_field_gaps(mu, T, WEAK_FIELDS)
        worst = max(worst, float(np.max(gaps[1:] / gaps[:-1])))
    return worst


@register("eos_zero_temperature", "eos", "P at T = 1e-3 against the T = 0 form away from Landau thresholds", 1e-3)
def check_zero_temperature() -> float:
    worst = 0.0
    for mu, B in ((1.0, 5.0), (3.0, 1.0), (2.5, 0.3), (2.0, 0.0)):
        pressure = landau_pressure(GasState(mu=mu, T=1e-3, B=B))
        worst = max(worst, _relative(pressure, zero_t_pressure(mu, B)))
    return worst


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


@register("fields_ball", "fields", "Uniform-ball potential and Hartree energy against closed forms", 1e-6)
def check_ball() -> float:
    rho = uniform_ball(ball_grid())
    values = coulomb_potential_at(rho, [0.0, 0.5, 2.0])
    expected = (1.5, 1.375, 0.5)
    worst = max(_relative(v, e) for v, e in zip(values, expected))
    return max(worst, _relative(hartree_energy(rho), 0.6))


@register("fields_newton", "fields", "Exterior potential against Q/r at twice the support radius", 1e-10)
def check_newton() -> float:
    grid = ball_grid(extent=4.0)
    worst = 0.0
    for rho in density_family(grid):
        r = grid.nodes
        support = float(r[rho.values > 0.0].max())
        charge = float(np.dot(grid.weights, rho.values))
        worst = max(worst, _relative(float(coulomb_potential_at(rho, [2.0 * support])[0]), charge / (2.0 * support)))
    return worst


@register("fields_sobolev", "fields", "max ‖v_ρ‖₆² / D(ρ,ρ) over the density family", 2.0 * SOBOLEV_COULOMB_BOUND)
def check_sobolev() -> float:
    grid = RadialGrid.logarithmic(20.0, 1500, 1e-6)
    return max(coulomb_l6_norm(rho) ** 2 / hartree_energy(rho) for rho in density_family(grid))


@register("fields_bilinear", "fields", "Polarization identity of the Hartree form", 1e-10)
def check_bilinear() -> float:
    grid = ball_grid()
    family = density_family(grid)
    worst = 0.0
    for first, second in zip(family[:-1], family[1:]):
        total = DensityField(grid=grid, values=first.values + second.values)
        expanded = hartree_energy(first) + 2.0 * hartree_energy(first, second) + hartree_energy(second)
        worst = max(worst, _relative(hartree_energy(total), expanded))
    return worst


@register("fields_poisson", "fields", "Error ratio of the radial Laplacian under mesh halving (second order: 0.25)", 0.4)
def check_poisson() -> float:
    errors = []
    for n in (201, 401):
        grid = RadialGrid.linear(6.0, n)
        rho = DensityField(grid=grid, values=np.exp(-grid.nodes**2))
        radii, laplacian = radial_laplacian(coulomb_potential(rho))
        window = (radii >= 0.5) & (radii <= 2.0)
        errors.append(float(np.max(np.abs(laplacian[window] + 4.0 * math.pi * np.exp(-radii[window] ** 2)))))
    return errors[1] / errors[0]


@register("fields_mollifier", "fields", "Mollified 1/r at r = 1 and mollified constants", 1e-8)
def check_mollifier() -> float:
    grid = RadialGrid.linear(4.0, 801)
    inverse = np.empty(grid.size)
    inverse[1:] = 1.0 / grid.nodes[1:]
    inverse[0] = 1.5 / grid.edges[1]
    smoothed = mollify(PotentialField(grid=grid, values=inverse), Mollifier(radius=0.1))
    index = int(np.argmin(np.abs(grid.nodes - 1.0)))
    worst = abs(smoothed.values[index] - 1.0)
    constant = mollify(PotentialField(grid=grid, values=np.full(grid.size, 2.5)), Mollifier(radius=0.3))
    return max(worst, float(np.max(np.abs(constant.values - 2.5))))


MOLLIFIER_RADII = (0.2, 0.1, 0.05)


def mollifier_errors(v: PotentialField, p: float, region: float = 2.0) -> List[float]:
    """‖v - v * j_r‖_{L^p(|x| <= region)} for each radius of MOLLIFIER_RADII."""
    return [
        lp_norm(v.values - mollify(v, Mollifier(radius=radius)).values, p, region=region, grid=v.grid)
        for radius in MOLLIFIER_RADII
    ]


@register("fields_mollifier_rate", "fields", "Largest L^p error ratio (p = 1, 2, 5/2) when the radius halves (second order: 0.25)", 0.35)
def check_mollifier_rate() -> float:
    grid = RadialGrid.linear(4.0, 801)
    worst = 0.0
    for width in (1.0, 0.5):
        v = PotentialField(grid=grid, values=np.exp(-width * grid.nodes**2))
        for p in (1.0, 2.0, 2.5):
            errors = mollifier_errors(v, p)
            worst = max(worst, *(fine / coarse for coarse, fine in zip(errors[:-1], errors[1:])))
    return worst


@register("fields_hartree_scaling", "fields", "D(ρ_2, ρ_2) = 2 D(ρ, ρ) for ρ_λ(x) = λ³ ρ(λx)", 1e-8)
def check_hartree_scaling() -> float:
    grid = ball_grid()
    squeezed = grid.rescaled(0.5)
    worst = 0.0
    for rho in density_family(grid):
        compressed = DensityField(grid=squeezed, values=8.0 * rho.values)
        worst = max(worst, _relative(hartree_energy(compressed), 2.0 * hartree_energy(rho)))
    return worst


# ---------------------------------------------------------------------------
# mtf
# ---------------------------------------------------------------------------


@register("mtf_legendre", "mtf", "f'(P'(μ)) = μ on a μ-grid", 1e-6)
def check_legendre() -> float:
    worst = 0.0
    for B in (0.0, 1.0):
        for mu in np.linspace(-5.0, 5.0, 11):
            recovered = free_energy_derivative(float(gas_density(mu, 1.0, B)), 1.0, B)
            worst = max(worst, abs(recovered - mu) / max(1.0, abs(mu)))
    return worst


@register("mtf_residual", "mtf", "Weighted residual of the reference solve", 1e-6)
def check_residual() -> float:
    prob, report = reference_solve()
    if not report.converged:
        return math.inf
    _, residual = tf_residual(report.density, prob)
    return residual


@register("mtf_duality", "mtf", "F[ρ*] = μ̃N - P at the reference solve", 1e-5)
def check_duality() -> float:
    prob, report = reference_solve()
    free = eval_free_energy_functional(report.density, prob)
    return _relative(free, prob.mu_tilde * report.particle_number - report.pressure)


@register("mtf_minimality", "mtf", "Functional drop under 20 admissible perturbations (0 at a minimum)", 1e-10)
def check_minimality() -> float:
    prob, report = reference_solve()
    rng = np.random.default_rng(SEED)
    r = prob.grid.nodes
    base = report.pressure
    worst = 0.0
    for _ in range(20):
        centre = rng.uniform(0.1, 2.0)
        width = rng.uniform(0.05, 0.5)
        size = rng.uniform(-1e-3, 1e-3)
        bump = size * np.exp(-(((r - centre) / width) ** 2))
        values = np.maximum(report.density.values + bump, 0.0)
        value = eval_pressure_functional(DensityField(grid=prob.grid, values=values), prob)
        worst = max(worst, (base - value) / max(1.0, abs(base)))
    return worst


@register("mtf_convexity", "mtf", "Midpoint convexity on 10 random density pairs", 1e-10)
def check_convexity() -> float:
    prob, report = reference_solve()
    rng = np.random.default_rng(SEED + 3)
    scale = report.density.values
    worst = 0.0
    for _ in range(10):
        first = scale * rng.uniform(0.0, 2.0, size=scale.size)
        second = scale * rng.uniform(0.0, 2.0, size=scale.size)
        values = [
            eval_pressure_functional(DensityField(grid=prob.grid, values=v), prob)
            for v in (first, second, 0.5 * (first + second))
        ]
        violation = values[2] - 0.5 * (values[0] + values[1])
        worst = max(worst, violation / max(1.0, abs(values[2])))
    return worst


@register("mtf_minimizer_bounds", "mtf", "Violation of D(ρ,ρ) <= P[ρ] <= P[0] at the reference solve", 1e-10)
def check_minimizer_bounds() -> float:
    prob, report = reference_solve()
    bounds = minimizer_bounds(report, prob)
    return max(0.0, bounds.hartree - bounds.pressure, bounds.pressure - bounds.pressure_at_zero) / max(
        1.0, bounds.pressure_at_zero
    )


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


@register("scaling_identities", "scaling", "h b = B̃ and h³ = Z^-1 (1+β)^{3/5} on a 100-point grid, in units of eps", 4.0)
def check_identities() -> float:
    eps = np.finfo(float).eps
    worst = 0.0
    for Z in np.geomspace(1.0, 1e6, 10):
        for B in np.concatenate(([0.0], np.geomspace(1e-2, 1e10, 9))):
            s = scale_params(PhysicalParams(Z=float(Z), B=float(B), T=1.0))
            worst = max(worst, abs(s.h * s.b - s.B_tilde) / max(s.B_tilde, 1e-300) / eps)
            cube = ((1.0 + s.beta) ** 3) ** 0.2 / Z
            worst = max(worst, abs(s.h**3 - cube) / cube / eps)
    return worst


@register("scaling_rescale", "scaling", "Dual-path functional discrepancy at (Z, β) = (1, 0), (2, 1), (10, 0)", 1e-8)
def check_rescale() -> float:
    grid = RadialGrid.logarithmic(8.0, 400, 1e-6)
    rho = DensityField(grid=grid, values=0.3 * np.exp(-(grid.nodes**2)))
    worst = 0.0
    for Z, beta in ((1.0, 0.0), (2.0, 1.0), (10.0, 0.0)):
        B = beta * float(np.cbrt(Z)) * Z
        params = PhysicalParams(Z=Z, B=B, T=0.5 * Z / scale_params(PhysicalParams(Z=Z, B=B, T=1.0)).ell, mu=0.0)
        worst = max(worst, pressure_rescale_check(rho, params).discrepancy)
    return worst


@register("scaling_defining_forms", "scaling", "h = ℓ^{-1/2} Z^{-1/2} and b = B ℓ^{3/2} Z^{-1/2}, in units of eps", 32.0)
def check_defining_forms() -> float:
    eps = np.finfo(float).eps
    worst = 0.0
    for Z in np.geomspace(1.0, 1e6, 10):
        for B in np.concatenate(([0.0], np.geomspace(1e-2, 1e10, 9))):
            Z, B = float(Z), float(B)
            s = scale_params(PhysicalParams(Z=Z, B=B, T=1.0))
            worst = max(worst, _relative(s.h, s.ell**-0.5 * Z**-0.5) / eps)
            if B > 0.0:
                worst = max(worst, _relative(s.b, B * s.ell**1.5 * Z**-0.5) / eps)
            elif s.b != 0.0:
                return math.inf
    return worst


@register("scaling_round_trip", "scaling", "Unscaling a scaled density restores values and radii", 1e-12)
def check_round_trip() -> float:
    grid = RadialGrid.logarithmic(6.0, 200, 1e-6)
    rho = DensityField(grid=grid, values=np.exp(-grid.nodes) + 0.1 * np.exp(-(grid.nodes**2)))
    worst = 0.0
    for Z, B in ((1.0, 0.0), (8.0, 16.0), (26.0, 1e4), (1e3, 1e5)):
        params = PhysicalParams(Z=Z, B=B, T=1.0)
        recovered = unscale_density(scale_density(rho, params), params)
        worst = max(
            worst,
            float(np.max(np.abs(recovered.values / rho.values - 1.0))),
            float(np.max(np.abs(recovered.grid.nodes[1:] / grid.nodes[1:] - 1.0))),
        )
    return worst


@register("scaling_length_monotone", "scaling", "Steps where ℓ fails to decrease in Z (fixed β) or in B (fixed Z)", 0.0)
def check_length_monotone() -> float:
    violations = 0
    charges = np.geomspace(1.0, 1e6, 13)
    for beta in (0.0, 1.0, 100.0):
        ells = [scale_params(PhysicalParams(Z=float(Z), B=beta * float(np.cbrt(Z)) * Z, T=1.0)).ell for Z in charges]
        violations += int(np.count_nonzero(np.diff(ells) >= 0.0))
    fields = np.concatenate(([0.0], np.geomspace(1e-2, 1e10, 25)))
    for Z in (1.0, 26.0, 1e4):
        ells = [scale_params(PhysicalParams(Z=Z, B=float(B), T=1.0)).ell for B in fields]
        violations += int(np.count_nonzero(np.diff(ells) >= 0.0))
    return float(violations)


@register("scaling_field_interpolation", "scaling", "|(1+β)^{-3/5} B̃ - 1| at β = 1e12, B̃ increasing in β", 1e-10)
def check_field_interpolation() -> float:
    betas = np.geomspace(1e-6, 1e12, 37)
    # Z = 1 makes β = B exactly
    scaled = [scale_params(PhysicalParams(Z=1.0, B=float(beta), T=1.0)) for beta in betas]
    fields = np.array([s.B_tilde for s in scaled])
    if np.any(np.diff(fields) <= 0.0):
        return math.inf
    last = scaled[-1]
    return abs((1.0 + last.beta) ** -0.6 * last.B_tilde - 1.0)


LIMIT_SOLVER_OPTIONS = {"tol": 1e-9, "max_iter": 2000, "anderson_depth": 5}


def limit_gaps(betas: Sequence[float], mode: str) -> Optional[np.ndarray]:
    """Relative gaps of a limit scan around the reference problem, or None if any member failed."""
    prob, _ = reference_solve()
    table = limit_scan(prob, betas, mode=mode, **LIMIT_SOLVER_OPTIONS)
    gaps = [row.rel_gap for row in table.rows]
    if not table.complete or any(gap is None for gap in gaps):
        return None
    return np.array(gaps)


@register("scaling_limit_infinite_field", "scaling", "Last gap of the β = 1e2, 1e4, 1e6 scan to β = ∞ (gaps must decrease)", 1e-2)
def check_limit_infinite_field() -> float:
    gaps = limit_gaps([1e2, 1e4, 1e6], "beta_to_inf")
    if gaps is None or not np.all(np.diff(gaps) < 0.0):
        return math.inf
    return float(gaps[-1])


@register("scaling_limit_zero_field", "scaling", "Largest gap ratio of the β = 1, 0.1, 0.01 scan to β = 0", 0.5)
def check_limit_zero_field() -> float:
    gaps = limit_gaps([1.0, 0.1, 0.01], "beta_to_zero")
    if gaps is None:
        return math.inf
    return float(np.max(gaps[1:] / gaps[:-1]))


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run_checks(tolerance_scale: float = 1.0, names: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """
    Run the battery (or the named subset) and return one result per check.

    Exceptions raised by a check become failed results; they never abort the run.
    """
    selected = [check for check in CHECKS if names is None or check.name in names]
    results = []
    for check in selected:
        error = None
        try:
            measured = float(check.run())
        except (MTFError, ArithmeticError, ValueError) as e:
            logger.debug(f"Check {check.name} raised", exc_info=True)
            measured = math.nan
            error = f"{type(e).__name__}: {e}"
        tolerance = check.tolerance * tolerance_scale
        passed = bool(measured <= tolerance)
        logger.debug(f"{check.name}: measured={measured:.3e}, tolerance={tolerance:.3e}")
        results.append(
            CheckResult(
                name=check.name,
                module=check.module,
                description=check.description,
                measured=measured,
                tolerance=tolerance,
                passed=passed,
                error=error,
            )
        )
    return results
