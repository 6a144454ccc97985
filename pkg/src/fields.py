"""
Radial grids, densities and potentials.

Fields are cell-constant: node i owns the spherical shell between the
midpoints to its neighbours, and node 0 (r = 0) owns the innermost ball.
Quadrature weights are the exact shell volumes. For a cell-constant density
the Coulomb potential, its shell averages and the Hartree energy are all
available in closed form through Newton's shell theorem.
"""

import logging
import math
from typing import TYPE_CHECKING, Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.interpolate import CubicSpline

from src.errors import DomainError, InvariantViolation, UnsupportedGeometryError

if TYPE_CHECKING:
    from src.models import PhysicalParams

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
FOUR_PI_THIRDS = FOUR_PI / 3.0

# ‖v_ρ‖_6^2 <= 8π D(ρ,ρ) / S_3 with the sharp Sobolev constant S_3 = 3 (π/2)^{4/3}
SOBOLEV_COULOMB_BOUND = 8.0 * math.pi / (3.0 * (math.pi / 2.0) ** (4.0 / 3.0))

MOLLIFIER_NODES = 48


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


class RadialGrid(BaseModel):
    """Radial mesh r_0 = 0 < r_1 < ... < r_{n-1} with shell-volume weights."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nodes: np.ndarray = Field(..., description="Node radii, starting at 0")
    edges: np.ndarray = Field(..., description="Shell boundaries, length n + 1")
    weights: np.ndarray = Field(..., description="Shell volumes for ∫ f 4πr² dr")

    @model_validator(mode="after")
    def _check_structure(self) -> "RadialGrid":
        nodes, edges, weights = self.nodes, self.edges, self.weights
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvariantViolation("A radial grid needs at least 3 nodes")
        if nodes[0] != 0.0:
            raise InvariantViolation("The first grid node must be r = 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise InvariantViolation("Grid nodes must be strictly increasing")
        if edges.shape != (nodes.size + 1,) or weights.shape != nodes.shape:
            raise InvariantViolation("Edges and weights do not match the nodes")
        if not np.all(weights > 0.0):
            raise InvariantViolation("Shell weights must be positive")
        return self

    @classmethod
    def from_nodes(cls, nodes) -> "RadialGrid":
        """Build edges and shell volumes from node radii."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvariantViolation("A radial grid needs at least 3 nodes")
        edges = np.empty(nodes.size + 1)
        edges[0] = 0.0
        edges[1:-1] = 0.5 * (nodes[:-1] + nodes[1:])
        edges[-1] = nodes[-1] + 0.5 * (nodes[-1] - nodes[-2])
        weights = FOUR_PI_THIRDS * np.diff(edges**3)
        return cls(nodes=_readonly(nodes), edges=_readonly(edges), weights=_readonly(weights))

    @classmethod
    def logarithmic(cls, r_max: float, n: int = 2000, r_min_ratio: float = 1e-6) -> "RadialGrid":
        """Node 0 at the origin plus n - 1 log-spaced nodes from r_min_ratio * r_max to r_max."""
        if r_max <= 0.0 or not 0.0 < r_min_ratio < 1.0 or n < 3:
            raise DomainError(
                f"Invalid logarithmic grid (r_max={r_max}, n={n}, r_min_ratio={r_min_ratio})"
            )
        radii = np.geomspace(r_min_ratio * r_max, r_max, n - 1)
        return cls.from_nodes(np.concatenate(([0.0], radii)))

    @classmethod
    def linear(cls, r_max: float, n: int) -> "RadialGrid":
        """Uniform nodes r_j = j h, h = r_max / (n - 1)."""
        if r_max <= 0.0 or n < 3:
            raise DomainError(f"Invalid linear grid (r_max={r_max}, n={n})")
        return cls.from_nodes(np.linspace(0.0, r_max, n))

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def extent(self) -> float:
        """Outer boundary of the last shell."""
        return float(self.edges[-1])

    def rescaled(self, factor: float) -> "RadialGrid":
        """The same mesh with every radius multiplied by factor."""
        return RadialGrid.from_nodes(self.nodes * factor)

    def ball_weights(self, radius: float = math.inf) -> np.ndarray:
        """Shell volumes clipped to the ball of the given radius."""
        if math.isinf(radius):
            return self.weights
        clipped = np.minimum(self.edges, radius)
        return FOUR_PI_THIRDS * np.diff(clipped**3)

    def cell_average_of_power(self, exponent: float) -> np.ndarray:
        """Shell averages of r^exponent, exponent > -3."""
        power = exponent + 3.0
        integrals = FOUR_PI * np.diff(self.edges**power) / power
        return integrals / self.weights


class RadialField(BaseModel):
    """A cell-constant radial field."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: RadialGrid
    values: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce_values(cls, data):
        if isinstance(data, dict) and "values" in data:
            data = dict(data)
            data["values"] = _readonly(np.asarray(data["values"], dtype=float))
        return data

    @model_validator(mode="after")
    def _check_shape(self) -> "RadialField":
        if self.values.shape != self.grid.nodes.shape:
            raise InvariantViolation(
                f"Field has {self.values.size} values for {self.grid.size} grid nodes"
            )
        return self


class DensityField(RadialField):
    """Nonnegative particle density."""

    @model_validator(mode="after")
    def _check_density(self) -> "DensityField":
        if not np.all(np.isfinite(self.values)):
            raise InvariantViolation("Density values must be finite")
        if np.any(self.values < 0.0):
            raise InvariantViolation(
                f"Density must be nonnegative (minimum {float(self.values.min()):.3e})"
            )
        return self

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "DensityField":
        return cls(grid=grid, values=np.zeros(grid.size))


class PotentialField(RadialField):
    """
    Potential sampled on the nodes.

    A Coulomb singularity at r = 0 is never sampled; node 0 carries the
    average over the innermost ball instead.
    """

    @model_validator(mode="after")
    def _check_potential(self) -> "PotentialField":
        if not np.all(np.isfinite(self.values)):
            raise InvariantViolation("Potential values must be finite")
        return self


def standard_bump(s: np.ndarray) -> np.ndarray:
    """Unnormalized radial profile exp(-1 / (1 - s²)) on s < 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


class Mollifier(BaseModel):
    """Smoothing kernel j_r(x) = r^-3 j(x / r), renormalized to unit mass after discretization."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(..., gt=0, description="Smoothing scale r")
    profile: Callable[[np.ndarray], np.ndarray] = Field(
        default=standard_bump, description="Radial profile supported on s < 1"
    )


class Confinement(BaseModel):
    """Confining potential W(x) = coefficient * |x|^exponent."""

    model_config = ConfigDict(frozen=True)

    coefficient: float = Field(1.0, gt=0, description="Prefactor of |x|^exponent")
    exponent: float = Field(2.0, ge=1, description="Growth exponent, at least linear")

    def value(self, r) -> np.ndarray:
        return self.coefficient * np.asarray(r, dtype=float) ** self.exponent

    def cell_average(self, grid: RadialGrid) -> np.ndarray:
        return self.coefficient * grid.cell_average_of_power(self.exponent)

    def inverse(self, level: float) -> float:
        """Radius where W reaches level (level >= 0)."""
        return (max(level, 0.0) / self.coefficient) ** (1.0 / self.exponent)


# ---------------------------------------------------------------------------
# Coulomb potential of a cell-constant density
# ---------------------------------------------------------------------------


def total_charge(rho: DensityField) -> float:
    """∫ ρ dx."""
    return float(np.dot(rho.grid.weights, rho.values))


def _shell_coefficients(rho: DensityField) -> Tuple[np.ndarray, np.ndarray]:
    """
    Inside shell i the potential is A_i / r - (2π/3) ρ_i r² + C_i.

    A_i is the enclosed charge at the inner edge minus (4π/3) ρ_i e_i³ and
    C_i = 2π ρ_i e_{i+1}² + Σ_{j>i} 2π ρ_j (e_{j+1}² - e_j²).
    """
    grid = rho.grid
    values = rho.values
    charge = grid.weights * values
    enclosed = np.concatenate(([0.0], np.cumsum(charge)[:-1]))
    inner = grid.edges[:-1]
    outer = grid.edges[1:]
    a = enclosed - FOUR_PI_THIRDS * values * inner**3

    shell_tail = 2.0 * math.pi * values * (outer**2 - inner**2)
    beyond = np.concatenate((np.cumsum(shell_tail[::-1])[::-1][1:], [0.0]))
    c = 2.0 * math.pi * values * outer**2 + beyond
    return a, c


def coulomb_potential_at(rho: DensityField, radii) -> np.ndarray:
    """ρ * |x|^-1 evaluated at arbitrary radii (exact for the cell-constant density)."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0.0):
        raise DomainError("Radii must be nonnegative")
    grid = rho.grid
    a, c = _shell_coefficients(rho)
    flat = radii.ravel()
    out = np.empty_like(flat)

    outside = flat >= grid.extent
    out[outside] = total_charge(rho) / flat[outside]

    inside = ~outside
    shell = np.searchsorted(grid.edges, flat[inside], side="right") - 1
    r = flat[inside]
    with np.errstate(divide="ignore", invalid="ignore"):
        singular = np.where(r > 0.0, a[shell] / np.where(r > 0.0, r, 1.0), 0.0)
    out[inside] = singular - (2.0 * math.pi / 3.0) * rho.values[shell] * r**2 + c[shell]
    return out.reshape(radii.shape)


def coulomb_potential(rho: DensityField) -> PotentialField:
    """
    Pointwise potential v(r) = 4π[(1/r)∫_0^r ρ s² ds + ∫_r^∞ ρ s ds] at every node.
    """
    values = coulomb_potential_at(rho, rho.grid.nodes)
    return PotentialField(grid=rho.grid, values=values)


def cell_averaged_potential(rho: DensityField) -> PotentialField:
    """Shell averages of ρ * |x|^-1; Σ w_i ρ_i v̄_i = 2 D(ρ, ρ) exactly."""
    grid = rho.grid
    a, c = _shell_coefficients(rho)
    inner = grid.edges[:-1]
    outer = grid.edges[1:]
    singular = 2.0 * math.pi * a * (outer**2 - inner**2)
    quadratic = (2.0 * math.pi / 3.0) * rho.values * (FOUR_PI / 5.0) * (outer**5 - inner**5)
    values = (singular - quadratic) / grid.weights + c
    return PotentialField(grid=grid, values=values)


def hartree_energy(rho1: DensityField, rho2: Optional[DensityField] = None) -> float:
    """
    D(ρ₁, ρ₂) = ½ ∫∫ ρ₁(x) ρ₂(y) / |x - y|; D(ρ, ρ) when rho2 is omitted.
    """
    if rho2 is None:
        rho2 = rho1
    elif rho2.grid is not rho1.grid and not np.array_equal(rho1.grid.nodes, rho2.grid.nodes):
        raise DomainError("Hartree energy needs both densities on the same grid")
    potential = cell_averaged_potential(rho2)
    return 0.5 * float(np.dot(rho1.grid.weights * rho1.values, potential.values))


def radial_laplacian(v: PotentialField) -> Tuple[np.ndarray, np.ndarray]:
    """
    Three-point finite-difference v'' + (2/r) v' on interior nodes.

    Returns:
        (radii, values) for nodes 1..n-2
    """
    r = v.grid.nodes
    values = v.values
    h_minus = r[1:-1] - r[:-2]
    h_plus = r[2:] - r[1:-1]
    left, centre, right = values[:-2], values[1:-1], values[2:]

    second = 2.0 * ((right - centre) / h_plus - (centre - left) / h_minus) / (h_plus + h_minus)
    first = (
        h_minus**2 * right - h_plus**2 * left + (h_plus**2 - h_minus**2) * centre
    ) / (h_plus * h_minus * (h_plus + h_minus))
    return r[1:-1], second + 2.0 * first / r[1:-1]


# ---------------------------------------------------------------------------
# External potential
# ---------------------------------------------------------------------------


def nuclear_attraction(grid: RadialGrid) -> np.ndarray:
    """Φ_C = 1/r at the nodes, with node 0 replaced by its ball average 3 / (2 e_1)."""
    out = np.empty(grid.size)
    out[1:] = 1.0 / grid.nodes[1:]
    out[0] = grid.cell_average_of_power(-1.0)[0]
    return out


def scaled_external_cells(z: float, confinement: Confinement, grid: RadialGrid) -> np.ndarray:
    """Shell averages of the scaled external potential -z/|x| + W(x)."""
    return -z * grid.cell_average_of_power(-1.0) + confinement.cell_average(grid)


def external_potential(
    params: "PhysicalParams", grid: RadialGrid, scaled: bool = False
) -> PotentialField:
    """
    External potential of a single nucleus at the origin plus confinement.

    Unscaled: V(r) = -Z z/r + Z ℓ^-1 W(ℓ^-1 r).
    Scaled:   Ṽ(r) = -z/r + W(r).

    Raises:
        UnsupportedGeometryError: More than one nucleus, or a nucleus off the origin
        DomainError: A charge fraction outside (0, 1]
    """
    if len(params.charges) != 1:
        raise UnsupportedGeometryError(
            f"The radial path supports exactly one nucleus, got {len(params.charges)}"
        )
    if params.positions and any(abs(c) > 0.0 for c in params.positions[0]):
        raise UnsupportedGeometryError("The radial path needs the nucleus at the origin")
    z = params.charges[0]
    if not 0.0 < z <= 1.0:
        raise DomainError(f"Nuclear charge fractions must lie in (0, 1], got {z}")

    coulomb = nuclear_attraction(grid)
    if scaled:
        confining = params.confinement.value(grid.nodes)
        confining[0] = params.confinement.cell_average(grid)[0]
        values = -z * coulomb + confining
    else:
        ell = params.length_scale
        confining = params.confinement.value(grid.nodes / ell)
        confining[0] = params.confinement.cell_average(grid.rescaled(1.0 / ell))[0]
        values = -params.Z * z * coulomb + params.Z / ell * confining
    return PotentialField(grid=grid, values=values)


# ---------------------------------------------------------------------------
# Mollification and norms
# ---------------------------------------------------------------------------


def mollify(v: PotentialField, m: Mollifier) -> PotentialField:
    """
    Radial convolution v * j_r.

    The spherical mean of a radial function over the sphere of radius t
    centred at distance r is (U(r + t) - U(|r - t|)) / (2 r t) with U' = r v(r);
    U comes from a cubic spline of r v(r). The kernel weights are renormalized
    to unit mass, so constants are preserved exactly.

    Raises:
        DomainError: If the smoothing radius reaches the grid extent
    """
    grid = v.grid
    if m.radius >= grid.nodes[-1]:
        raise DomainError(
            f"Mollifier radius {m.radius} exceeds the grid extent {grid.nodes[-1]}"
        )

    spline = CubicSpline(grid.nodes, grid.nodes * v.values)
    antiderivative = spline.antiderivative()

    nodes, weights = np.polynomial.legendre.leggauss(MOLLIFIER_NODES)
    t = 0.5 * m.radius * (nodes + 1.0)
    kernel = np.asarray(m.profile(t / m.radius), dtype=float) * FOUR_PI * t**2 * weights
    mass = kernel.sum()
    if not mass > 0.0:
        raise DomainError("Mollifier profile has no mass on its support")
    kernel = kernel / mass

    r = grid.nodes[:, None]
    shells = t[None, :]
    means = np.empty((grid.size, t.size))
    centre = r[:, 0] == 0.0
    off = ~centre
    means[off] = (antiderivative(r[off] + shells) - antiderivative(np.abs(r[off] - shells))) / (
        2.0 * r[off] * shells
    )
    means[centre] = spline(t)[None, :] / t[None, :]
    return PotentialField(grid=grid, values=means @ kernel)


def lp_norm(
    f: Union[RadialField, np.ndarray],
    p: float,
    region: float = math.inf,
    grid: Optional[RadialGrid] = None,
) -> float:
    """
    (∫_{|x| <= region} |f|^p dx)^{1/p} by shell quadrature; p = inf gives the sup.

    Raises:
        DomainError: If p < 1
    """
    if not p >= 1.0:
        raise DomainError(f"L^p norms need p >= 1, got p={p}")
    if isinstance(f, RadialField):
        grid, values = f.grid, f.values
    else:
        if grid is None:
            raise DomainError("A grid is required for raw value arrays")
        values = np.asarray(f, dtype=float)
    weights = grid.ball_weights(region)
    magnitude = np.abs(values)
    if math.isinf(p):
        covered = weights > 0.0
        return float(magnitude[covered].max()) if covered.any() else 0.0
    return float(np.dot(weights, magnitude**p) ** (1.0 / p))


def coulomb_l6_norm(rho: DensityField) -> float:
    """
    ‖ρ * |x|^-1‖_6 over all space.

    The grid part uses the nodal potential; beyond the last shell v = Q/r
    adds 4π Q^6 / (3 R^3) to ∫ v^6.
    """
    potential = coulomb_potential(rho)
    exterior = FOUR_PI * total_charge(rho) ** 6 / (3.0 * rho.grid.extent**3)
    return (lp_norm(potential, 6.0) ** 6 + exterior) ** (1.0 / 6.0)
