"""
Parameter scalings and limit studies.

Physical parameters (Z, B, T, μ) map onto the O(1) scaled problem through

    β = B / Z^{4/3},   ℓ = Z^{-1/3} (1+β)^{-2/5},
    μ̃ = μ ℓ / Z,       T̃ = T ℓ / Z,       B̃ = β (1+β)^{-2/5},

and the semiclassical parameters h = Z^{-1/3}(1+β)^{1/5}, b = Z^{1/3}β(1+β)^{-3/5}
with h b = B̃. The pressure functional rescales exactly:
P[ρ; μ, T, B, Z] = Z² ℓ^-1 P̃[ρ̃; μ̃, T̃, β].
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import List, Optional, Sequence

import numpy as np

from src.eos import gas_pressure
from src.errors import DomainError, MTFError, RangeError, UnsupportedGeometryError
from src.fields import DensityField, RadialGrid, cell_averaged_potential
from src.models import (
    PhysicalParams,
    RescaleReport,
    ScaledParams,
    ScaledProblem,
    ScanRow,
    ScanTable,
)
from src.mtf import build_scaled_problem, eval_pressure_functional, scf_solve

logger = logging.getLogger(__name__)

SCAN_MODES = ("beta_to_inf", "beta_to_zero")


def _check_params(p: PhysicalParams) -> None:
    if not (p.Z > 0.0 and math.isfinite(p.Z)):
        raise DomainError(f"Nuclear charge scale Z must be positive, got {p.Z}")
    if not (p.T > 0.0 and math.isfinite(p.T)):
        raise DomainError(f"Temperature must be positive, got T={p.T}")
    if not p.B >= 0.0:
        raise DomainError(f"Field must be nonnegative, got B={p.B}")
    if any(not 0.0 < z <= 1.0 for z in p.charges):
        raise DomainError(f"Charge fractions must lie in (0, 1], got {p.charges}")


def scale_params(p: PhysicalParams) -> ScaledParams:
    """
    All scaled quantities of a physical parameter set.

    Raises:
        DomainError: If Z <= 0, T <= 0, B < 0 or a charge fraction is outside (0, 1]
        RangeError: If a scaled quantity overflows
    """
    _check_params(p)
    # One cube root and one fifth power keep h b = B̃ and h³ = Z^-1 (1+β)^{3/5} within a few ulp
    cube_root = float(np.cbrt(p.Z))
    beta = p.B / (cube_root * p.Z)
    q = (1.0 + beta) ** 0.2
    ell = 1.0 / (cube_root * q * q)
    scaled = ScaledParams(
        beta=beta,
        ell=ell,
        mu_tilde=p.mu * ell / p.Z,
        T_tilde=p.T * ell / p.Z,
        B_tilde=beta / (q * q),
        h=q / cube_root,
        b=cube_root * beta / q**3,
    )
    values = scaled.model_dump().values()
    if not all(math.isfinite(v) for v in values):
        raise RangeError(f"Scaled parameters are not representable for Z={p.Z}, B={p.B}")
    return scaled


def scale_density(rho_tilde: DensityField, p: PhysicalParams) -> DensityField:
    """ρ(x) = Z ℓ^-3 ρ̃(x / ℓ) on the grid stretched by ℓ."""
    s = scale_params(p)
    grid = rho_tilde.grid.rescaled(s.ell)
    return DensityField(grid=grid, values=p.Z * s.ell**-3 * rho_tilde.values)


def unscale_density(rho: DensityField, p: PhysicalParams) -> DensityField:
    """Inverse of scale_density."""
    s = scale_params(p)
    grid = rho.grid.rescaled(1.0 / s.ell)
    return DensityField(grid=grid, values=s.ell**3 / p.Z * rho.values)


def to_scaled_problem(
    p: PhysicalParams,
    grid: Optional[RadialGrid] = None,
    n: int = 2000,
    r_max: Optional[float] = None,
    r_min_ratio: float = 1e-6,
    spacing: str = "log",
) -> ScaledProblem:
    """
    Scaled problem for a single nucleus at the origin.

    Raises:
        UnsupportedGeometryError: More than one nucleus or a nucleus off the origin
    """
    if len(p.charges) != 1:
        raise UnsupportedGeometryError(
            f"The radial path supports exactly one nucleus, got {len(p.charges)}"
        )
    if p.positions and any(abs(c) > 0.0 for c in p.positions[0]):
        raise UnsupportedGeometryError("The radial path needs the nucleus at the origin")
    s = scale_params(p)
    z = p.charges[0]
    if grid is not None:
        return ScaledProblem(
            mu_tilde=s.mu_tilde,
            T_tilde=s.T_tilde,
            beta=s.beta,
            z=z,
            confinement=p.confinement,
            grid=grid,
        )
    return build_scaled_problem(
        s.mu_tilde,
        s.T_tilde,
        beta=s.beta,
        z=z,
        confinement=p.confinement,
        n=n,
        r_max=r_max,
        r_min_ratio=r_min_ratio,
        spacing=spacing,
    )


def unscaled_functional(rho: DensityField, p: PhysicalParams) -> float:
    """
    The pressure functional in physical units,
    ∫ P_{T,B}(μ - V - ρ*|x|^-1) + D(ρ, ρ) with V = -Z z/|x| + Z ℓ^-1 W(x / ℓ).

    Raises:
        RangeError: If the value is not representable
    """
    s = scale_params(p)
    grid = rho.grid
    z = p.charges[0]
    # Shell averages of the external potential
    confining = p.confinement.cell_average(grid.rescaled(1.0 / s.ell))
    potential = -p.Z * z * grid.cell_average_of_power(-1.0) + p.Z / s.ell * confining
    vbar = cell_averaged_potential(rho).values
    pressures = np.asarray(gas_pressure(p.mu - potential - vbar, p.T, p.B))
    value = float(np.dot(grid.weights, pressures)) + 0.5 * float(np.dot(grid.weights * rho.values, vbar))
    if not math.isfinite(value):
        raise RangeError(f"Unscaled functional is not finite at Z={p.Z}; evaluate in scaled variables")
    return value


def pressure_rescale_check(rho_tilde: DensityField, p: PhysicalParams) -> RescaleReport:
    """
    Evaluate the functional both ways and report |P - Z² ℓ^-1 P̃| / |P|.
    """
    s = scale_params(p)
    problem = to_scaled_problem(p, grid=rho_tilde.grid)
    scaled = eval_pressure_functional(rho_tilde, problem)
    unscaled = unscaled_functional(scale_density(rho_tilde, p), p)
    factor = p.Z**2 / s.ell
    if not math.isfinite(factor * scaled):
        raise RangeError(f"Z² ℓ^-1 P̃ overflows at Z={p.Z}; evaluate in scaled variables")
    discrepancy = abs(unscaled - factor * scaled) / abs(unscaled) if unscaled != 0.0 else abs(scaled)
    logger.debug(f"Rescale check Z={p.Z}, beta={s.beta}: discrepancy {discrepancy:.3e}")
    return RescaleReport(
        Z=p.Z, beta=s.beta, scaled=scaled, unscaled=unscaled, factor=factor, discrepancy=discrepancy
    )


# ---------------------------------------------------------------------------
# Limit scans
# ---------------------------------------------------------------------------


def _check_schedule(betas: Sequence[float], mode: str) -> None:
    if mode not in SCAN_MODES:
        raise DomainError(f"Unknown scan mode '{mode}' (expected one of {', '.join(SCAN_MODES)})")
    if not betas:
        raise DomainError("A scan needs at least one beta")
    if any(not (b >= 0.0 and math.isfinite(b)) for b in betas):
        raise DomainError(f"Scan betas must be finite and nonnegative, got {list(betas)}")
    pairs = list(zip(betas, betas[1:]))
    if mode == "beta_to_inf" and any(later <= earlier for earlier, later in pairs):
        raise DomainError(f"beta_to_inf needs a strictly increasing schedule, got {list(betas)}")
    if mode == "beta_to_zero" and any(later >= earlier for earlier, later in pairs):
        raise DomainError(f"beta_to_zero needs a strictly decreasing schedule, got {list(betas)}")


def _solve_member(prob: ScaledProblem, beta: float, solver_options: dict):
    member = prob.model_copy(update={"beta": beta})
    return scf_solve(member, **solver_options)


def limit_scan(
    prob: ScaledProblem,
    betas: Sequence[float],
    mode: str = "beta_to_inf",
    max_workers: int = 4,
    **solver_options,
) -> ScanTable:
    """
    Solve at every β of the schedule and at the limit branch, and tabulate
    |P(β) - P(limit)| / P(limit).

    Members that fail are kept as rows with converged=False and an error
    message; the table is then partial.

    Args:
        prob: Template problem; its beta is replaced by each member
        betas: Monotone schedule (increasing for beta_to_inf, decreasing for beta_to_zero)
        mode: beta_to_inf (limit: lowest Landau level) or beta_to_zero (limit: no field)
        max_workers: Thread pool size
        **solver_options: Forwarded to scf_solve
    """
    _check_schedule(betas, mode)
    limit_beta = math.inf if mode == "beta_to_inf" else 0.0
    members = [limit_beta] + list(betas)

    logger.info(f"Scan {mode}: {len(betas)} members plus the limit branch, {max_workers} workers")
    outcomes = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {
            executor.submit(_solve_member, prob, beta, solver_options): i
            for i, beta in enumerate(members)
        }
        for future in as_completed(future_to_index):
            index = future_to_index[future]
            try:
                report = future.result()
                outcomes.append((index, report, None))
            except MTFError as e:
                logger.error(f"❌ Scan member beta={members[index]} failed: {e}")
                outcomes.append((index, None, str(e)))

    # Deterministic merge order
    outcomes.sort(key=lambda item: item[0])

    _, limit_report, limit_error = outcomes[0]
    limit_converged = limit_report is not None and limit_report.converged
    limit_pressure = limit_report.pressure if limit_report is not None else None
    if not limit_converged:
        logger.warning(f"Limit branch beta={limit_beta} did not converge: {limit_error or 'max_iter'}")

    rows: List[ScanRow] = []
    for index, report, error in outcomes[1:]:
        row = ScanRow(index=index - 1, beta=members[index], limit_pressure=limit_pressure)
        if report is None:
            row.error = error
        else:
            row.pressure = report.pressure
            row.converged = report.converged
            if not report.converged:
                row.error = f"not converged (residual {report.residual:.3e})"
            elif limit_converged and limit_pressure:
                row.rel_gap = abs(report.pressure - limit_pressure) / abs(limit_pressure)
        rows.append(row)

    table = ScanTable(
        mode=mode,
        limit_beta=limit_beta,
        limit_pressure=limit_pressure,
        limit_converged=limit_converged,
        rows=rows,
    )
    if table.complete:
        logger.info(f"✓ Scan complete ({len(rows)} members)")
    else:
        failed = sum(1 for row in rows if not row.converged)
        logger.warning(f"Scan partial: {failed} of {len(rows)} members failed")
    return table


def fit_decay_exponent(rows: Sequence[ScanRow]) -> Optional[float]:
    """
    Least-squares slope of log(rel_gap) against log(β).

    Returns None with fewer than three usable rows.
    """
    points = [
        (row.beta, row.rel_gap)
        for row in rows
        if row.rel_gap is not None and row.rel_gap > 0.0 and row.beta > 0.0
    ]
    if len(points) < 3:
        return None
    x = np.log([beta for beta, _ in points])
    y = np.log([gap for _, gap in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
