import math

import numpy as np
import pytest

from src.errors import DomainError, UnsupportedGeometryError
from src.fields import DensityField, RadialGrid, hartree_energy, total_charge
from src.models import PhysicalParams, ScanRow
from src.mtf import build_scaled_problem
from src.scaling import (
    fit_decay_exponent,
    limit_scan,
    pressure_rescale_check,
    scale_density,
    scale_params,
    to_scaled_problem,
    unscale_density,
)

OXYGEN_IN_FIELD = PhysicalParams(Z=8.0, B=16.0, T=2.0, mu=-1.0)


# ---------------------------------------------------------------------------
# Parameter scaling
# ---------------------------------------------------------------------------


def test_reference_scaling_values():
    s = scale_params(OXYGEN_IN_FIELD)
    assert s.beta == pytest.approx(1.0, rel=1e-15)
    assert s.ell == pytest.approx(0.378929, abs=1e-6)
    assert s.h == pytest.approx(0.574349, abs=1e-6)
    assert s.b == pytest.approx(1.319508, abs=1e-6)
    assert s.h * s.b == pytest.approx(0.757858, abs=1e-6)
    assert s.T_tilde == pytest.approx(2.0 * s.ell / 8.0, rel=1e-15)
    assert s.mu_tilde == pytest.approx(-s.ell / 8.0, rel=1e-15)


def test_length_scale_agrees_with_params():
    assert OXYGEN_IN_FIELD.length_scale == scale_params(OXYGEN_IN_FIELD).ell
    assert OXYGEN_IN_FIELD.beta == scale_params(OXYGEN_IN_FIELD).beta


@pytest.mark.parametrize("Z", [1.0, 26.0, 1e4])
@pytest.mark.parametrize("B", [0.0, 1e-3, 5.0, 1e7])
def test_identities_hold_to_a_few_ulps(Z, B):
    eps = np.finfo(float).eps
    s = scale_params(PhysicalParams(Z=Z, B=B, T=1.0))
    if B > 0.0:
        assert abs(s.h * s.b - s.B_tilde) / s.B_tilde <= 4.0 * eps
    else:
        assert s.b == 0.0 and s.B_tilde == 0.0
    cube = ((1.0 + s.beta) ** 3) ** 0.2 / Z
    assert abs(s.h**3 - cube) / cube <= 4.0 * eps


@pytest.mark.parametrize("Z", [1.0, 8.0, 1e6])
@pytest.mark.parametrize("B", [0.0, 16.0, 1e10])
def test_defining_forms_of_h_and_b(Z, B):
    s = scale_params(PhysicalParams(Z=Z, B=B, T=1.0))
    assert s.h == pytest.approx(s.ell**-0.5 * Z**-0.5, rel=1e-14)
    assert s.b == pytest.approx(B * s.ell**1.5 * Z**-0.5, rel=1e-14, abs=0.0)


@pytest.mark.parametrize("beta", [0.0, 1.0, 100.0])
def test_length_scale_decreases_with_z_at_fixed_beta(beta):
    zs = [1.0, 2.0, 8.0, 26.0, 92.0, 1e4]
    ells = [scale_params(PhysicalParams(Z=Z, B=beta * Z ** (4.0 / 3.0), T=1.0)).ell for Z in zs]
    assert all(later < earlier for earlier, later in zip(ells[:-1], ells[1:]))


@pytest.mark.parametrize("Z", [1.0, 26.0, 1e4])
def test_length_scale_decreases_with_field(Z):
    fields = [0.0, 1e-3, 1.0, 1e3, 1e6, 1e9]
    ells = [scale_params(PhysicalParams(Z=Z, B=B, T=1.0)).ell for B in fields]
    assert all(later < earlier for earlier, later in zip(ells[:-1], ells[1:]))


def test_length_scale_in_a_fixed_field():
    # d ln ℓ / d ln Z = -1/3 + (8/15) β/(1+β) changes sign at β = 5/3
    weak = [scale_params(PhysicalParams(Z=Z, B=1.0, T=1.0)).ell for Z in (1.0, 10.0, 100.0, 1e3)]
    assert all(later < earlier for earlier, later in zip(weak[:-1], weak[1:]))
    strong = [scale_params(PhysicalParams(Z=Z, B=1e6, T=1.0)).ell for Z in (1.0, 10.0, 100.0)]
    assert all(later > earlier for earlier, later in zip(strong[:-1], strong[1:]))


def test_scaled_field_interpolates_between_regimes():
    betas = np.geomspace(1e-6, 1e12, 37)
    scaled = [scale_params(PhysicalParams(Z=1.0, B=float(beta), T=1.0)) for beta in betas]
    fields = np.array([s.B_tilde for s in scaled])
    assert np.all(np.diff(fields) > 0.0)
    weighted = (1.0 + betas) ** -0.6 * fields
    np.testing.assert_allclose(weighted, betas / (1.0 + betas), rtol=1e-13)
    assert weighted[-1] == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize(
    "params",
    [
        PhysicalParams(Z=0.0, T=1.0),
        PhysicalParams(Z=-2.0, T=1.0),
        PhysicalParams(Z=1.0, T=0.0),
        PhysicalParams(Z=1.0, T=1.0, B=-1.0),
        PhysicalParams(Z=1.0, T=1.0, charges=[1.5]),
    ],
)
def test_invalid_parameters(params):
    with pytest.raises(DomainError):
        scale_params(params)


# ---------------------------------------------------------------------------
# Densities and problems
# ---------------------------------------------------------------------------


def test_density_scaling_round_trip():
    grid = RadialGrid.logarithmic(5.0, 120, 1e-5)
    rho = DensityField(grid=grid, values=np.exp(-grid.nodes))
    physical = scale_density(rho, OXYGEN_IN_FIELD)
    ell = scale_params(OXYGEN_IN_FIELD).ell
    np.testing.assert_allclose(physical.grid.nodes, ell * grid.nodes, rtol=1e-14)
    assert total_charge(physical) == pytest.approx(8.0 * total_charge(rho), rel=1e-12)

    recovered = unscale_density(physical, OXYGEN_IN_FIELD)
    np.testing.assert_allclose(recovered.values, rho.values, rtol=1e-13)
    np.testing.assert_allclose(recovered.grid.nodes, grid.nodes, rtol=1e-13)


@pytest.mark.parametrize(
    "params",
    [OXYGEN_IN_FIELD, PhysicalParams(Z=1.0, T=1.0), PhysicalParams(Z=26.0, B=1e4, T=1.0)],
)
def test_hartree_energy_follows_coulomb_scaling(params):
    grid = RadialGrid.logarithmic(6.0, 300, 1e-6)
    rho = DensityField(grid=grid, values=np.exp(-(grid.nodes**2)))
    ell = scale_params(params).ell
    expected = params.Z**2 / ell * hartree_energy(rho)
    assert hartree_energy(scale_density(rho, params)) == pytest.approx(expected, rel=1e-10)


def test_to_scaled_problem():
    prob = to_scaled_problem(OXYGEN_IN_FIELD, n=100)
    s = scale_params(OXYGEN_IN_FIELD)
    assert prob.beta == s.beta
    assert prob.T_tilde == s.T_tilde
    assert prob.z == 1.0
    assert prob.grid.size == 100
    assert prob.B_tilde == pytest.approx(s.B_tilde, rel=1e-14)


def test_to_scaled_problem_keeps_given_grid():
    grid = RadialGrid.linear(10.0, 50)
    assert to_scaled_problem(OXYGEN_IN_FIELD, grid=grid).grid is grid


@pytest.mark.parametrize(
    "params",
    [
        PhysicalParams(Z=8.0, T=1.0, charges=[0.5, 0.5]),
        PhysicalParams(Z=8.0, T=1.0, positions=[(0.1, 0.0, 0.0)]),
    ],
)
def test_to_scaled_problem_geometry(params):
    with pytest.raises(UnsupportedGeometryError):
        to_scaled_problem(params, n=50)


def test_nucleus_at_origin_is_accepted():
    params = PhysicalParams(Z=8.0, T=1.0, positions=[(0.0, 0.0, 0.0)])
    assert to_scaled_problem(params, n=50).z == 1.0


@pytest.mark.parametrize("Z, beta", [(1.0, 0.0), (2.0, 1.0), (10.0, 0.0), (30.0, 3.0)])
def test_pressure_rescales_exactly(Z, beta):
    grid = RadialGrid.logarithmic(8.0, 400, 1e-6)
    rho = DensityField(grid=grid, values=0.3 * np.exp(-(grid.nodes**2)))
    B = beta * float(np.cbrt(Z)) * Z
    ell = scale_params(PhysicalParams(Z=Z, B=B, T=1.0)).ell
    params = PhysicalParams(Z=Z, B=B, T=0.5 * Z / ell)
    report = pressure_rescale_check(rho, params)
    assert report.discrepancy <= 1e-8
    assert report.factor == pytest.approx(Z**2 / ell)


# ---------------------------------------------------------------------------
# Limit scans
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "betas, mode",
    [
        ([], "beta_to_inf"),
        ([1.0, 1.0], "beta_to_inf"),
        ([10.0, 1.0], "beta_to_inf"),
        ([1.0, 10.0], "beta_to_zero"),
        ([-1.0], "beta_to_inf"),
        ([math.inf], "beta_to_inf"),
        ([1.0], "sideways"),
    ],
)
def test_scan_schedule_validation(small_problem, betas, mode):
    with pytest.raises(DomainError):
        limit_scan(small_problem, betas, mode=mode)


def test_single_member_scan():
    prob = build_scaled_problem(-50.0, 1.0, z=0.0, n=64)
    table = limit_scan(prob, [10.0], max_workers=1)
    assert table.complete
    assert len(table.rows) == 1
    assert table.rows[0].rel_gap is not None
    assert table.gaps_decreasing is None
    assert fit_decay_exponent(table.rows) is None


def test_scan_keeps_failed_members(small_problem):
    table = limit_scan(small_problem, [1.0, 2.0], max_workers=2, max_iter=1)
    assert not table.complete
    assert [row.beta for row in table.rows] == [1.0, 2.0]
    assert [row.index for row in table.rows] == [0, 1]
    assert all(row.error and "not converged" in row.error for row in table.rows)
    assert all(row.rel_gap is None for row in table.rows)


@pytest.mark.slow
def test_gaps_shrink_toward_lowest_landau_level(small_problem):
    table = limit_scan(
        small_problem, [1e2, 1e4, 1e6], tol=1e-9, max_iter=2000, anderson_depth=5, max_workers=4
    )
    assert table.complete
    assert table.gaps_decreasing
    assert math.isinf(table.limit_beta)
    assert table.rows[-1].rel_gap <= 1e-2


@pytest.mark.slow
def test_gaps_shrink_toward_zero_field(small_problem):
    table = limit_scan(
        small_problem,
        [1.0, 0.1, 0.01],
        mode="beta_to_zero",
        tol=1e-9,
        max_iter=2000,
        anderson_depth=5,
    )
    assert table.complete
    assert table.gaps_decreasing
    exponent = fit_decay_exponent(table.rows)
    assert exponent is not None and exponent > 0.5


def test_decay_exponent_fit():
    rows = [ScanRow(index=i, beta=beta, rel_gap=3.0 * beta**-0.5) for i, beta in enumerate([1e2, 1e3, 1e4, 1e5])]
    assert fit_decay_exponent(rows) == pytest.approx(-0.5, abs=1e-10)


def test_decay_exponent_skips_unusable_rows():
    rows = [
        ScanRow(index=0, beta=1e2, rel_gap=1e-2),
        ScanRow(index=1, beta=1e3, rel_gap=None),
        ScanRow(index=2, beta=1e4, rel_gap=0.0),
        ScanRow(index=3, beta=1e5, rel_gap=1e-4),
    ]
    assert fit_decay_exponent(rows) is None
