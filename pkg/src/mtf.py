"""
Magnetic Thomas-Fermi pressure functional and its minimizer.

Everything here works in scaled variables on a cell-constant radial grid:

    P̃[ρ] = Σ_i w_i g P_{T̃,B̃}(ψ_i - v̄_i) + D(ρ, ρ),    ψ = μ̃ + z Φ̄ - W̄

with g = (1+β)^{-3/5}, Φ̄ and W̄ the shell averages of 1/r and of the
confinement, and v̄ the shell-averaged Coulomb potential of ρ. With this
discretization the gradient of P̃ is K (ρ - G(ρ)), K the (positive) Coulomb
matrix and G(ρ) = g P'(ψ - v̄), so the fixed-point direction G(ρ) - ρ is
always a descent direction and the Legendre duality holds exactly at the
discrete fixed point.
"""

import logging
import math
from collections import deque
from typing import Deque, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from src.eos import (
    BRACKET_STEPS,
    PRESSURE_BOUND_CONSTANTS,
    FreeGas,
    LowestLandauGas,
    MagneticGas,
    NonmagneticGas,
    gas_density,
    gas_pressure,
)
from src.errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    InternalError,
    SetupError,
)
from src.fields import (
    Confinement,
    DensityField,
    PotentialField,
    RadialGrid,
    cell_averaged_potential,
    coulomb_l6_norm,
    hartree_energy,
    lp_norm,
    total_charge,
)
from src.models import (
    BoundsReport,
    ExchangeBound,
    ExchangeReport,
    FieldRegime,
    MinimizerBounds,
    PhysicalParams,
    ScaledProblem,
    SolveReport,
)

logger = logging.getLogger(__name__)

# Outer shell share of the ρ = 0 pressure integral above which the grid is rejected
TAIL_FRACTION_LIMIT = 1e-10
# Thermal lengths of confinement beyond the classically allowed region
AUTO_RADIUS_THERMAL_DEPTH = 40.0

DESCENT_SLACK = 1e-13
MIN_STEP = 1e-6

EXCHANGE_SHIFT = 3.68


def free_gas(prob: ScaledProblem) -> FreeGas:
    """The weighted free gas behind the scaled functional."""
    if prob.regime is FieldRegime.LOWEST_LANDAU:
        return LowestLandauGas(T=prob.T_tilde)
    if prob.beta == 0.0:
        return NonmagneticGas(T=prob.T_tilde)
    return MagneticGas(T=prob.T_tilde, B=prob.B_tilde, weight=prob.pressure_weight)


def external_cells(prob: ScaledProblem) -> np.ndarray:
    """ψ = μ̃ + z Φ̄ - W̄ on every shell."""
    grid = prob.grid
    return prob.mu_tilde + prob.z * grid.cell_average_of_power(-1.0) - prob.confinement.cell_average(grid)


def auto_radius(mu_tilde: float, T_tilde: float, z: float, confinement: Confinement) -> float:
    """
    Radius L where W(L) - z/L = max(μ̃, 0) + 40 T̃.

    Beyond L the free-gas pressure at ρ = 0 is below e^-40 of its value at
    the classical turning point.
    """
    level = max(mu_tilde, 0.0) + AUTO_RADIUS_THERMAL_DEPTH * T_tilde
    if z == 0.0:
        return confinement.inverse(level)

    def excess(r: float) -> float:
        return float(confinement.value(r)) - z / r - level

    hi = max(confinement.inverse(level), 1.0)
    for _ in range(BRACKET_STEPS):
        if excess(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise BracketError("Could not find the confinement radius", bracket=(0.0, hi))
    lo = min(z / (level + float(confinement.value(hi))), hi) * 0.5
    return float(brentq(excess, lo, hi, xtol=1e-12))


def build_scaled_problem(
    mu_tilde: float,
    T_tilde: float,
    beta: float = 0.0,
    z: float = 1.0,
    confinement: Optional[Confinement] = None,
    n: int = 2000,
    r_max: Optional[float] = None,
    r_min_ratio: float = 1e-6,
    spacing: str = "log",
) -> ScaledProblem:
    """
    Assemble a ScaledProblem, choosing the grid extent from the confinement when r_max is None.
    """
    confinement = confinement or Confinement()
    if r_max is None:
        r_max = auto_radius(mu_tilde, T_tilde, z, confinement)
    if spacing == "linear":
        grid = RadialGrid.linear(r_max, n)
    else:
        grid = RadialGrid.logarithmic(r_max, n, r_min_ratio)
    logger.debug(f"Grid: {spacing}, n={n}, r_max={r_max:.6g}")
    return ScaledProblem(
        mu_tilde=mu_tilde, T_tilde=T_tilde, beta=beta, z=z, confinement=confinement, grid=grid
    )


def _check_density(rho: DensityField, prob: ScaledProblem) -> None:
    if rho.grid is not prob.grid and not np.array_equal(rho.grid.nodes, prob.grid.nodes):
        raise DomainError("Density and problem live on different grids")


def check_setup(prob: ScaledProblem, gas: Optional[FreeGas] = None, psi: Optional[np.ndarray] = None) -> None:
    """
    Reject grids on which the confinement does not make the pressure integrable.

    Raises:
        SetupError: If the outermost shell carries more than TAIL_FRACTION_LIMIT
            of the ρ = 0 pressure integral
    """
    gas = gas or free_gas(prob)
    psi = external_cells(prob) if psi is None else psi
    weights = prob.grid.weights
    pressures = np.asarray(gas.pressure(psi))
    total = float(np.dot(weights, pressures))
    if not math.isfinite(total):
        raise SetupError("Pressure integral at zero density is not finite on this grid")
    if total == 0.0:
        return
    fraction = weights[-1] * pressures[-1] / total
    if fraction > TAIL_FRACTION_LIMIT:
        raise SetupError(
            f"Confinement does not make the pressure integrable on this grid "
            f"(outer shell carries {fraction:.3e} of the integral); enlarge r_max"
        )


def _pressure_terms(
    values: np.ndarray, prob: ScaledProblem, gas: FreeGas, psi: np.ndarray
) -> Tuple[float, float, np.ndarray]:
    rho = DensityField(grid=prob.grid, values=values)
    vbar = cell_averaged_potential(rho).values
    integral = float(np.dot(prob.grid.weights, gas.pressure(psi - vbar)))
    hartree = 0.5 * float(np.dot(prob.grid.weights * values, vbar))
    return integral, hartree, vbar


def eval_pressure_functional(rho: DensityField, prob: ScaledProblem) -> float:
    """
    Scaled MTF pressure functional (1+β)^{-3/5} ∫ P_{T̃,B̃}(μ̃ - Ṽ_ρ) + D(ρ, ρ).

    Raises:
        SetupError: If the grid truncates a non-negligible part of the pressure
    """
    _check_density(rho, prob)
    gas = free_gas(prob)
    psi = external_cells(prob)
    check_setup(prob, gas, psi)
    integral, hartree, _ = _pressure_terms(rho.values, prob, gas, psi)
    return integral + hartree


def pressure_functional_terms(rho: DensityField, prob: ScaledProblem) -> dict:
    """Breakdown of the functional into its pressure integral and Hartree term."""
    _check_density(rho, prob)
    integral, hartree, _ = _pressure_terms(rho.values, prob, free_gas(prob), external_cells(prob))
    return {"pressure_integral": integral, "hartree": hartree}


def effective_potential(rho: DensityField, prob: ScaledProblem) -> PotentialField:
    """Shell-averaged Ṽ_ρ = -z Φ̄ + W̄ + v̄_ρ."""
    _check_density(rho, prob)
    vbar = cell_averaged_potential(rho).values
    return PotentialField(grid=prob.grid, values=prob.mu_tilde - external_cells(prob) + vbar)


def _update_target(values: np.ndarray, prob: ScaledProblem, gas: FreeGas, psi: np.ndarray) -> np.ndarray:
    rho = DensityField(grid=prob.grid, values=values)
    vbar = cell_averaged_potential(rho).values
    target = np.asarray(gas.density(psi - vbar), dtype=float)
    if not np.all(np.isfinite(target)) or np.any(target < 0.0):
        raise InternalError("Free-gas density returned a negative or non-finite value")
    return target


def _weighted_residual(values: np.ndarray, target: np.ndarray) -> float:
    return float(np.max(np.abs(values - target) / (1.0 + values)))


def tf_residual(rho: DensityField, prob: ScaledProblem) -> Tuple[np.ndarray, float]:
    """
    Residual of the MTF equation ρ - g P'(μ̃ + zΦ - W - ρ*|x|^-1) on every shell.

    Returns:
        (pointwise residual, sup-norm weighted by 1 / (1 + ρ))
    """
    _check_density(rho, prob)
    target = _update_target(rho.values, prob, free_gas(prob), external_cells(prob))
    return rho.values - target, _weighted_residual(rho.values, target)


class AndersonMixer:
    """
    Anderson mixing of density iterates.

    Keeps the last `depth` differences of iterates and of fixed-point
    residuals and extrapolates with least-squares coefficients in the
    shell-volume metric.
    """

    def __init__(self, depth: int, weight: float, metric: np.ndarray):
        self.depth = depth
        self.weight = weight
        self._scale = np.sqrt(metric)
        self._last: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._dx: Deque[np.ndarray] = deque(maxlen=depth)
        self._df: Deque[np.ndarray] = deque(maxlen=depth)

    def __str__(self):
        return f"{self.__class__.__name__}{{depth: {self.depth}, weight: {self.weight:.4f}}}"

    __repr__ = __str__

    def reset(self) -> None:
        self._last = None
        self._dx.clear()
        self._df.clear()

    def __call__(self, x: np.ndarray, f: np.ndarray) -> Optional[np.ndarray]:
        """Mixed iterate from x and its residual f, or None while the history is empty."""
        if self._last is not None:
            self._dx.append(x - self._last[0])
            self._df.append(f - self._last[1])
        self._last = (x.copy(), f.copy())
        if not self._df:
            return None

        dx = np.column_stack(self._dx)
        df = np.column_stack(self._df)
        coefficients, *_ = np.linalg.lstsq(
            df * self._scale[:, None], f * self._scale, rcond=None
        )
        return x + self.weight * f - (dx + self.weight * df) @ coefficients


def scf_solve(
    prob: ScaledProblem,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 500,
    anderson_depth: int = 0,
    initial: Optional[DensityField] = None,
    raise_on_failure: bool = False,
) -> SolveReport:
    """
    Minimize the scaled pressure functional by damped fixed-point iteration.

    Each step moves along G(ρ) - ρ and halves the step until the functional
    does not increase. With anderson_depth > 0 an Anderson-mixed candidate is
    tried first and kept only when it lowers the functional.

    Args:
        prob: Scaled problem
        damping: Initial step α in (0, 1]
        tol: Target sup-norm of |ρ - G(ρ)| / (1 + ρ)
        max_iter: Maximum number of steps
        anderson_depth: History length for Anderson mixing (0 disables)
        initial: Starting density (default G(0), an upper bound of the fixed point)
        raise_on_failure: Raise ConvergenceError instead of returning a non-converged report

    Returns:
        SolveReport: Final density and diagnostics; converged is False when max_iter ran out

    Raises:
        SetupError: If the grid truncates the pressure integral
        InternalError: If the free-gas density turns negative
    """
    if not 0.0 < damping <= 1.0:
        raise DomainError(f"damping must lie in (0, 1], got {damping}")
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")

    grid = prob.grid
    weights = grid.weights
    gas = free_gas(prob)
    psi = external_cells(prob)
    check_setup(prob, gas, psi)

    if initial is None:
        values = _update_target(np.zeros(grid.size), prob, gas, psi)
    else:
        _check_density(initial, prob)
        values = np.array(initial.values, dtype=float)

    def functional(candidate: np.ndarray) -> float:
        integral, hartree, _ = _pressure_terms(candidate, prob, gas, psi)
        return integral + hartree

    mixer = AndersonMixer(anderson_depth, damping, weights) if anderson_depth > 0 else None
    current = functional(values)
    history = []
    step = damping
    iterations = 0
    anderson_steps = 0
    converged = False

    logger.debug(
        f"SCF start: mu={prob.mu_tilde}, T={prob.T_tilde}, beta={prob.beta}, z={prob.z}, n={grid.size}"
    )
    while True:
        target = _update_target(values, prob, gas, psi)
        residual = _weighted_residual(values, target)
        history.append(residual)
        logger.debug(f"SCF iteration {iterations}: residual={residual:.3e}, functional={current:.12g}")
        if residual <= tol:
            converged = True
            break
        if iterations >= max_iter:
            break

        iterations += 1
        direction = target - values
        slack = DESCENT_SLACK * max(1.0, abs(current))

        if mixer is not None:
            mixed = mixer(values, direction)
            if mixed is not None:
                mixed = np.maximum(mixed, 0.0)
                trial_value = functional(mixed)
                if trial_value < current:
                    values, current = mixed, trial_value
                    anderson_steps += 1
                    continue
                mixer.reset()

        # Backtracking; the previous accepted step is the starting guess
        step = min(damping, 2.0 * step)
        accepted = False
        while step >= MIN_STEP:
            trial = np.maximum(values + step * direction, 0.0)
            trial_value = functional(trial)
            if trial_value <= current + slack:
                values, current = trial, trial_value
                accepted = True
                break
            step *= 0.5
        if not accepted:
            logger.warning(f"Line search stalled at iteration {iterations} (step < {MIN_STEP})")
            break

    rho = DensityField(grid=grid, values=values)
    integral, hartree, _ = _pressure_terms(values, prob, gas, psi)
    report = SolveReport(
        density=rho,
        pressure=integral + hartree,
        residual=history[-1],
        residual_history=history,
        iterations=iterations,
        converged=converged,
        tolerance=tol,
        hartree=hartree,
        particle_number=total_charge(rho),
        functional_terms={"pressure_integral": integral, "hartree": hartree},
        anderson_steps=anderson_steps,
    )

    if converged:
        logger.info(
            f"✓ SCF converged in {iterations} iterations "
            f"(residual {report.residual:.2e}, pressure {report.pressure:.10g})"
        )
    else:
        logger.warning(
            f"❌ SCF did not converge in {max_iter} iterations (residual {report.residual:.2e})"
        )
        if raise_on_failure:
            raise ConvergenceError(
                f"SCF did not converge in {max_iter} iterations (residual {report.residual:.3e})"
            )
    return report


# ---------------------------------------------------------------------------
# Legendre side
# ---------------------------------------------------------------------------


def free_energy_derivative(rho_val: float, T: float, B: float = 0.0) -> float:
    """
    f'(ρ): the chemical potential μ with P'_{T,B}(μ) = ρ.

    Raises:
        DomainError: If ρ < 0, T <= 0 or B < 0
        BracketError: If the root search cannot bracket ρ
    """
    if not (rho_val >= 0.0 and math.isfinite(rho_val)):
        raise DomainError(f"Density must be finite and nonnegative, got {rho_val}")
    if not T > 0.0:
        raise DomainError(f"Temperature must be positive, got T={T}")
    if not B >= 0.0:
        raise DomainError(f"Field must be nonnegative, got B={B}")
    if rho_val == 0.0:
        return -math.inf

    def excess(mu: float) -> float:
        return float(gas_density(mu, T, B)) - rho_val

    lo, hi = -T, T
    for _ in range(BRACKET_STEPS):
        low_ok = excess(lo) < 0.0
        high_ok = excess(hi) > 0.0
        if low_ok and high_ok:
            break
        if not low_ok:
            lo *= 2.0
        if not high_ok:
            hi *= 2.0
    else:
        raise BracketError(f"Could not bracket the chemical potential for rho={rho_val}", bracket=(lo, hi))
    return float(brentq(excess, lo, hi, xtol=1e-13, rtol=4.0 * np.finfo(float).eps))


def free_energy_density(rho_val: float, T: float, B: float = 0.0) -> float:
    """
    Legendre transform f(ρ) = sup_μ {μρ - P_{T,B}(μ)}, with f(0) = 0.
    """
    mu = free_energy_derivative(rho_val, T, B)
    if rho_val == 0.0:
        return 0.0
    return mu * rho_val - float(gas_pressure(mu, T, B))


def eval_free_energy_functional(rho: DensityField, prob: ScaledProblem) -> float:
    """
    Free energy functional ∫ {f(ρ) + Ṽ ρ} + D(ρ, ρ) with the weighted gas of the problem.
    """
    _check_density(rho, prob)
    gas = free_gas(prob)
    potential = prob.mu_tilde - external_cells(prob)
    weights = prob.grid.weights
    bulk = float(np.dot(weights, np.asarray(gas.free_energy(rho.values)) + potential * rho.values))
    return bulk + hartree_energy(rho)


def dual_tf_residual(rho: DensityField, prob: ScaledProblem, threshold: float = 1e-8) -> float:
    """
    max |f'(ρ) + Ṽ_ρ - μ̃| over shells with ρ above threshold.
    """
    gas = free_gas(prob)
    occupied = rho.values > threshold
    if not occupied.any():
        return 0.0
    derivative = np.asarray(gas.inverse_density(rho.values[occupied]))
    potential = effective_potential(rho, prob).values[occupied]
    return float(np.max(np.abs(derivative + potential - prob.mu_tilde)))


# ---------------------------------------------------------------------------
# Correction term and semiclassical diagnostics
# ---------------------------------------------------------------------------


def exchange_correction(
    rho: DensityField, gamma: float, params: Optional[PhysicalParams] = None
) -> ExchangeReport:
    """
    C_{γ,ρ} = (3 / 5γ) ∫ ρ^{5/3} and the chemical-potential shift 3.68 γ.

    With physical parameters the γ-window (1+β)^{2/5} << γ << Z^{4/3}(1+β)^{2/5}
    is reported as two ratios that should both be small.
    """
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    integral = float(np.dot(rho.grid.weights, rho.values ** (5.0 / 3.0)))
    lower_ratio = upper_ratio = None
    if params is not None:
        widening = (1.0 + params.beta) ** 0.4
        lower_ratio = widening / gamma
        upper_ratio = gamma / (params.Z ** (4.0 / 3.0) * widening)
    return ExchangeReport(
        gamma=gamma,
        correction=3.0 / (5.0 * gamma) * integral,
        mu_shift=EXCHANGE_SHIFT * gamma,
        lower_ratio=lower_ratio,
        upper_ratio=upper_ratio,
    )


def exchange_upper_bound(
    prob: ScaledProblem, rho: DensityField, gamma: float, params: PhysicalParams
) -> ExchangeBound:
    """
    Scaled counterpart of P[ρ; μ + 3.68γ] + C_{γ,ρ}.

    Dividing by Z² ℓ^-1 turns the shift into 3.68 γ ℓ / Z and the correction
    into Z^{-1/3} ℓ^{-1} (3 / 5γ) ∫ ρ̃^{5/3}.
    """
    if not gamma > 0.0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    ell = params.length_scale
    shifted = prob.model_copy(update={"mu_tilde": prob.mu_tilde + EXCHANGE_SHIFT * gamma * ell / params.Z})
    functional = eval_pressure_functional(rho, shifted)
    correction = exchange_correction(rho, gamma).correction * params.Z ** (-1.0 / 3.0) / ell
    return ExchangeBound(
        mu_tilde_shifted=shifted.mu_tilde,
        functional=functional,
        correction=correction,
        upper_bound=functional + correction,
    )


def semiclassical_pressure(v: PotentialField, h: float, b: float, tau: float) -> float:
    """
    P^scl = ∫ h^-3 P_{τ,hb}(-v(x)) dx over the shells of v's grid.
    """
    if not (h > 0.0 and tau > 0.0 and b >= 0.0):
        raise DomainError(f"Need h > 0, b >= 0, tau > 0 (got h={h}, b={b}, tau={tau})")
    pressures = np.asarray(gas_pressure(-v.values, tau, h * b))
    return float(np.dot(v.grid.weights, pressures)) / h**3


def semiclassical_bounds(w: float, h: float, b: float, tau: float) -> BoundsReport:
    """
    Sandwich for h^-3 P_{τ,hb}(w) with the free-gas constants.
    """
    if not (h > 0.0 and tau > 0.0 and b >= 0.0):
        raise DomainError(f"Need h > 0, b >= 0, tau > 0 (got h={h}, b={b}, tau={tau})")
    w_plus = max(w, 0.0)
    field = b * w_plus**1.5 / h**2
    bulk = w_plus**2.5 / h**3
    tail = math.exp(-abs(w) / tau) * (b * tau**1.5 / h**2 + tau**2.5 / h**3)
    value = float(gas_pressure(w, tau, h * b)) / h**3
    lower = PRESSURE_BOUND_CONSTANTS[0] * (field + bulk)
    upper = PRESSURE_BOUND_CONSTANTS[1] * (field + bulk + tail)
    return BoundsReport(
        lower=lower,
        value=value,
        upper=upper,
        terms={"field": field, "bulk": bulk, "thermal_tail": tail},
        contained=bool(lower <= value <= upper),
    )


def minimizer_bounds(report: SolveReport, prob: ScaledProblem) -> MinimizerBounds:
    """
    D(ρ,ρ) <= P̃[ρ] <= P̃[0] together with the norms of the minimizer that stay
    bounded uniformly in β.
    """
    rho = report.density
    at_zero = eval_pressure_functional(DensityField.zeros(prob.grid), prob)
    pressure = eval_pressure_functional(rho, prob)
    slack = 1e-10 * max(1.0, abs(at_zero))
    return MinimizerBounds(
        hartree=report.hartree,
        pressure=pressure,
        pressure_at_zero=at_zero,
        l1_norm=lp_norm(rho, 1.0),
        l3_2_norm=lp_norm(rho, 1.5),
        l5_3_norm=lp_norm(rho, 5.0 / 3.0),
        potential_l6_norm=coulomb_l6_norm(rho),
        satisfied=bool(report.hartree <= pressure + slack and pressure <= at_zero + slack),
    )
