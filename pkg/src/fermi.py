"""
Complete Fermi-Dirac integrals.

    I_k(x) = ∫_0^∞ y^k / (exp(y - x) + 1) dy

Evaluation is split into three regimes of the argument:

    x < SERIES_EDGE                     alternating exponential series
    SERIES_EDGE <= x < SOMMERFELD_EDGE  piecewise Chebyshev interpolants
    x >= SOMMERFELD_EDGE                Sommerfeld asymptotic series

The Chebyshev coefficients are built lazily, once per (order, derivative),
from a composite Gauss-Legendre rule in the variable t = sqrt(y). The
substitution removes the y^(-1/2) endpoint singularity of I_{-1/2}.

Every function accepts scalars or numpy arrays and returns a float for a
scalar argument.
"""

import logging
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy.special import expit, gamma, zeta

from src.errors import DomainError, UnsupportedOrderError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SERIES_EDGE = -5.0
SOMMERFELD_EDGE = 40.0
SERIES_TERMS = 16
SOMMERFELD_TERMS = 16

PANEL_WIDTH = 1.0
CHEBYSHEV_DEGREE = 18

# Build-time quadrature in t = sqrt(y); t^2 - x >= 60 at the upper limit
QUAD_T_MAX = 10.0
QUAD_PANEL = 0.125
QUAD_NODES = 20

MAX_DERIVATIVE_ORDER = 7


class FermiOrder(float, Enum):
    """Supported orders k of I_k."""

    MINUS_HALF = -0.5
    HALF = 0.5
    ONE = 1.0
    THREE_HALVES = 1.5


def fermi_order(k: float) -> FermiOrder:
    """Resolve a numeric order, raising UnsupportedOrderError if it is not implemented."""
    try:
        return FermiOrder(float(k))
    except (ValueError, TypeError):
        supported = ", ".join(f"{member.value:g}" for member in FermiOrder)
        raise UnsupportedOrderError(
            f"Fermi-Dirac order k={k!r} is not supported (supported: {supported})"
        ) from None


def fermi_function(u: ArrayLike) -> ArrayLike:
    """Occupation 1 / (exp(u) + 1), overflow-safe for any finite u."""
    return expit(-np.asarray(u, dtype=float))


def fermi_integral(k: float, x: ArrayLike) -> ArrayLike:
    """
    Evaluate I_k(x).

    Args:
        k: Order, one of -1/2, 1/2, 1, 3/2
        x: Finite argument (scalar or array)

    Returns:
        I_k(x), relative accuracy better than 1e-10 for |x| <= 700

    Raises:
        UnsupportedOrderError: If k is not a supported order
        DomainError: If any x is not finite
    """
    order = fermi_order(k)
    return _evaluate(order.value, x, 0)


def fermi_integral_prime(k: float, x: ArrayLike) -> ArrayLike:
    """
    First derivative d/dx I_k(x) = k * I_{k-1}(x) for k in {1/2, 3/2}.
    """
    order = fermi_order(k)
    if order not in (FermiOrder.HALF, FermiOrder.THREE_HALVES):
        raise UnsupportedOrderError(
            f"fermi_integral_prime needs k in {{1/2, 3/2}}, got k={k!r}"
        )
    values = _evaluate(order.value - 1.0, x, 0)
    return order.value * values


def fermi_integral_derivative(k: float, x: ArrayLike, order: int) -> ArrayLike:
    """
    m-th derivative of I_k with respect to x.

    Computed from the m-th derivative of the occupation factor, so no
    continuation of I_k to orders below -1/2 is needed.

    Args:
        k: Order of the integral
        x: Finite argument
        order: Derivative order m, 0 <= m <= MAX_DERIVATIVE_ORDER
    """
    fermi = fermi_order(k)
    if not 0 <= int(order) <= MAX_DERIVATIVE_ORDER or int(order) != order:
        raise DomainError(
            f"Derivative order must be an integer in [0, {MAX_DERIVATIVE_ORDER}], got {order!r}"
        )
    return _evaluate(fermi.value, x, int(order))


def _evaluate(k: float, x: ArrayLike, m: int) -> ArrayLike:
    values = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("Fermi-Dirac integral argument must be finite")

    flat = values.ravel()
    out = np.empty_like(flat)

    low = flat < SERIES_EDGE
    high = flat >= SOMMERFELD_EDGE
    middle = ~(low | high)

    if low.any():
        out[low] = _series(k, flat[low], m)
    if middle.any():
        out[middle] = _chebyshev(k, flat[middle], m)
    if high.any():
        out[high] = _sommerfeld(k, flat[high], m)

    out = out.reshape(values.shape)
    if out.ndim == 0:
        return float(out)
    return out


def _series(k: float, x: np.ndarray, m: int) -> np.ndarray:
    """Γ(k+1) Σ (-1)^(n+1) n^(m-k-1) e^(nx), differentiated m times term by term."""
    n = np.arange(1, SERIES_TERMS + 1, dtype=float)[:, None]
    signs = np.where(n % 2 == 1, 1.0, -1.0)
    terms = signs * n ** (m - k - 1.0) * np.exp(n * x[None, :])
    # Smallest terms first
    return gamma(k + 1.0) * terms[::-1].sum(axis=0)


def _falling(a: float, j: int) -> float:
    """Falling factorial a (a-1) ... (a-j+1)."""
    result = 1.0
    for i in range(j):
        result *= a - i
    return result


@lru_cache(maxsize=None)
def _sommerfeld_coefficients(k: float) -> Tuple[float, ...]:
    """
    Coefficients c_n of I_k(x) ~ Σ_n c_n x^(k+1-2n).

    c_0 = 1/(k+1) and c_n = 2 η(2n) k (k-1) ... (k-2n+2), with η the
    alternating zeta function. Exponentially small corrections vanish for
    half-integer k and are below 1e-17 for the remaining orders at the
    regime edge.
    """
    coefficients = [1.0 / (k + 1.0)]
    for n in range(1, SOMMERFELD_TERMS):
        eta = (1.0 - 2.0 ** (1 - 2 * n)) * float(zeta(2 * n))
        coefficients.append(2.0 * eta * _falling(k, 2 * n - 1))
    return tuple(coefficients)


def _sommerfeld(k: float, x: np.ndarray, m: int) -> np.ndarray:
    coefficients = _sommerfeld_coefficients(k)
    out = np.zeros_like(x)
    for n in reversed(range(len(coefficients))):
        power = k + 1.0 - 2 * n
        factor = coefficients[n] * _falling(power, m)
        if factor == 0.0:
            continue
        out += factor * x ** (power - m)
    return out


@lru_cache(maxsize=1)
def _quadrature_rule() -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(QUAD_NODES)
    starts = np.arange(0.0, QUAD_T_MAX, QUAD_PANEL)
    half = 0.5 * QUAD_PANEL
    t = (starts[:, None] + half * (nodes[None, :] + 1.0)).ravel()
    w = np.broadcast_to(half * weights, (starts.size, QUAD_NODES)).ravel().copy()
    return t, w


@lru_cache(maxsize=None)
def _occupation_derivative(m: int) -> Polynomial:
    """
    Polynomial r_m with d^m/du^m φ(u) = φ (1 - φ) r_m(φ) for m >= 1.

    Uses φ' = φ^2 - φ. Factoring out φ (1 - φ) keeps the kernel accurate in
    both tails, where φ or 1 - φ underflows.
    """
    step = Polynomial([0.0, -1.0, 1.0])
    p = Polynomial([0.0, 1.0])
    for _ in range(m):
        p = p.deriv() * step
    quotient, _ = divmod(p, step)
    return -quotient


def _quadrature(k: float, x: np.ndarray, m: int) -> np.ndarray:
    """∂_x^m I_k(x) = ∫ 2 t^(2k+1) ∂_x^m φ(t^2 - x) dt on the build rule."""
    t, w = _quadrature_rule()
    u = t[None, :] ** 2 - x[:, None]
    phi = expit(-u)
    if m == 0:
        kernel = phi
    else:
        # ∂_x = -∂_u
        kernel = (-1.0) ** m * phi * expit(u) * _occupation_derivative(m)(phi)
    jacobian = 2.0 * t ** (2.0 * k + 1.0) * w
    return kernel @ jacobian


@lru_cache(maxsize=None)
def _chebyshev_table(k: float, m: int) -> np.ndarray:
    """Per-panel Chebyshev coefficients of ∂^m I_k on [SERIES_EDGE, SOMMERFELD_EDGE)."""
    edges = np.arange(SERIES_EDGE, SOMMERFELD_EDGE + 0.5 * PANEL_WIDTH, PANEL_WIDTH)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        series = Chebyshev.interpolate(
            lambda pts: _quadrature(k, np.asarray(pts, dtype=float), m),
            CHEBYSHEV_DEGREE,
            domain=[lo, hi],
        )
        rows.append(series.coef)
    table = np.array(rows)
    table.setflags(write=False)
    logger.debug(f"Built Chebyshev table for k={k:g}, derivative {m} ({table.shape[0]} panels)")
    return table


def _chebyshev(k: float, x: np.ndarray, m: int) -> np.ndarray:
    table = _chebyshev_table(k, m)
    panel = np.floor((x - SERIES_EDGE) / PANEL_WIDTH).astype(int)
    panel = np.clip(panel, 0, table.shape[0] - 1)
    t = 2.0 * (x - (SERIES_EDGE + panel * PANEL_WIDTH)) / PANEL_WIDTH - 1.0

    # Clenshaw recurrence with a per-element coefficient gather
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for j in range(table.shape[1] - 1, 0, -1):
        b1, b2 = table[panel, j] + 2.0 * t * b1 - b2, b1
    return table[panel, 0] + t * b1 - b2
