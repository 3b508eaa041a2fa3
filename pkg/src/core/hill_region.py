"""
Geometry of the earth component of {K = 0} in Levi-Civita coordinates.

For fixed v, K is quadratic in u:

    K(v, u) = 1/2 |u|^2 + <u, w(v)> + e(v),
    w(v) = 2|v|^2 iv - mu i conj(v),
    e(v) = |v|^2 (c - mu / |1 - 2v^2|) - (1 - mu)/2.

So the sublevel set {K <= 0} meets each u-plane in the disk with centre
-w(v) and radius sqrt(|w|^2 - 2e), and Sigma projects onto the region where
e - |w|^2/2 <= 0. The earth component is the connected piece of that region
containing v = 0, found by radial continuation along n_theta rays.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from config import settings
from src.core.dynamics import Params, RegPoint, RegularizedSystem
from src.core.errors import SingularityError
from src.utils.validators import validate_resolution, validate_unit_vector

logger = logging.getLogger(__name__)


def fiber_shift(params: Params, v) -> np.ndarray:
    """w(v) = 2|v|^2 iv - mu i conj(v), the linear coefficient of K in u."""
    v = np.asarray(v, dtype=complex)
    return 2.0 * np.abs(v) ** 2 * 1j * v - params.mu * 1j * np.conj(v)


def zero_momentum_energy(params: Params, v) -> np.ndarray:
    """e(v) = K(v, 0); the sun term is dropped when mu = 0."""
    v = np.asarray(v, dtype=complex)
    r2 = np.abs(v) ** 2
    if params.mu == 0.0:
        return params.c * r2 - 0.5
    with np.errstate(divide='ignore'):
        sun = params.mu / np.abs(1.0 - 2.0 * v * v)
    return r2 * (params.c - sun) - 0.5 * (1.0 - params.mu)


def shadow_function(params: Params, v) -> np.ndarray:
    """min over u of K(v, u) = e(v) - |w(v)|^2 / 2; Sigma projects onto {<= 0}."""
    return zero_momentum_energy(params, v) - 0.5 * np.abs(fiber_shift(params, v)) ** 2


def _check_sun_guard(params: Params, v: complex):
    if params.mu > 0.0 and abs(2.0 * v * v - 1.0) < settings.SINGULARITY_GUARD:
        raise SingularityError("|2v^2 - 1| is below the guard (sun collision)")


def momentum_magnitude(params: Params, v, w_hat) -> Optional[float]:
    """
    Solve K(v, s w_hat) = 0 for s >= 0.

    K(v, s w_hat) = s^2/2 + b s + e with b = <w_hat, w(v)>, so
    s = -b + sqrt(b^2 - 2e).

    Args:
        params: Mass ratio and energy parameter
        v: Position (complex or pair)
        w_hat: Unit direction of u (complex or pair)

    Returns:
        Optional[float]: |u|, or None when no nonnegative root exists

    Raises:
        SingularityError: when v is at the sun collision
        InvalidParamsError: when w_hat is not a unit vector
    """
    v = complex(*v) if not isinstance(v, complex) else v
    if isinstance(w_hat, complex):
        w_hat = (w_hat.real, w_hat.imag)
    direction = complex(*validate_unit_vector('w_hat', w_hat))
    _check_sun_guard(params, v)

    b = float(np.real(direction * np.conj(fiber_shift(params, v))))
    e = float(zero_momentum_energy(params, v))
    discriminant = b * b - 2.0 * e
    if discriminant < 0.0:
        return None
    root = -b + math.sqrt(discriminant)
    if root < 0.0:
        return None
    return root


class HillComponent:
    """
    Radial description of the earth component of a region in the v-plane.

    Along each ray from the origin the boundary is the first zero of the
    region function. If the ray runs into the sun collision before the
    function turns positive, the earth and sun components are connected and
    `separated` is False.

    Attributes:
        thetas: Ray angles
        radii: Boundary radius along each ray
        separated: Whether every ray closed before reaching the sun collision
    """

    def __init__(self, params: Params, n_theta: int, region: str = 'shadow'):
        """
        Trace the component along n_theta equally spaced rays.

        Args:
            params: Mass ratio and energy parameter (mu < 1)
            n_theta: Number of rays
            region: 'shadow' for the projection of Sigma, 'zero_momentum'
                for {K(v, 0) <= 0}
        """
        self.params = params
        self.region = region
        self.thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.radii, self.separated = trace_rays(params, _REGIONS[region], self.thetas)
        if not self.separated:
            logger.warning("earth component for mu=%r, c=%r is not separated from the sun collision",
                           params.mu, params.c)

    @property
    def max_radius(self) -> float:
        return float(np.max(self.radii)) if len(self.radii) else 0.0


_REGIONS = {'shadow': shadow_function, 'zero_momentum': zero_momentum_energy}


def trace_rays(params: Params, function, thetas: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    First zero of `function` along each ray, starting from the origin.

    The ray is scanned on HILL_RADIAL_STEPS points up to HILL_MAX_RADIUS and
    the first sign change is refined with brentq.

    Returns:
        Tuple[np.ndarray, bool]: boundary radii and whether every ray closed
        before approaching the sun collision
    """
    steps = settings.HILL_RADIAL_STEPS
    r = settings.HILL_MAX_RADIUS * np.arange(1, steps + 1) / steps
    rays = np.exp(1j * thetas)[:, None] * r[None, :]
    outside = function(params, rays) > 0.0
    if params.mu > 0.0:
        near_sun = np.abs(2.0 * rays * rays - 1.0) < settings.HILL_SUN_APPROACH
    else:
        near_sun = np.zeros_like(outside)

    radii = np.empty(len(thetas))
    separated = True
    for j, theta in enumerate(thetas):
        first_out = int(np.argmax(outside[j])) if outside[j].any() else steps
        first_sun = int(np.argmax(near_sun[j])) if near_sun[j].any() else steps
        if first_sun <= first_out or first_out == steps:
            separated = False
            radii[j] = r[max(first_sun - 1, 0)]
            continue
        hi = r[first_out]
        lo = r[first_out - 1] if first_out > 0 else 0.0
        direction = complex(math.cos(theta), math.sin(theta))
        radii[j] = brentq(lambda s: float(function(params, s * direction)), lo, hi,
                          xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return radii, separated


def in_earth_component(params: Params, v: complex, region: str = 'shadow') -> bool:
    """
    Whether v lies in the earth component of a region, by radial continuation.

    Unlike a bare sign test of the region function this excludes the far
    piece of the shadow region, where e - |w|^2/2 turns negative again.

    Args:
        params: Mass ratio and energy parameter
        v: Position
        region: 'shadow' or 'zero_momentum', as for HillComponent

    Returns:
        bool: True inside (boundary included); False when the component is
        not separated from the sun collision
    """
    v = complex(v)
    if v == 0:
        return True
    radii, separated = trace_rays(params, _REGIONS[region], np.array([math.atan2(v.imag, v.real)]))
    return separated and abs(v) <= radii[0] * (1.0 + 1e-12)


def hill_region_test(params: Params, v) -> bool:
    """
    Whether v lies in the earth component of {K(v, 0) <= 0}.

    Membership requires e(v) <= 0 and that the radial segment from the origin
    to v stays inside the set.

    Args:
        params: Mass ratio and energy parameter
        v: Position (complex or pair)

    Returns:
        bool: True inside (boundary included)
    """
    v = complex(*v) if not isinstance(v, complex) else v
    if params.mu >= 1.0:
        return v == 0
    if params.mu > 0.0 and abs(2.0 * v * v - 1.0) < settings.SINGULARITY_GUARD:
        return False
    if float(zero_momentum_energy(params, v)) > 1e-12:
        return False
    if v == 0:
        return True
    radii, separated = trace_rays(params, zero_momentum_energy,
                                  np.array([math.atan2(v.imag, v.real)]))
    return abs(v) <= radii[0] * (1.0 + 1e-12)


def fiber_points(params: Params, v: np.ndarray, t_values: np.ndarray,
                 directions: np.ndarray) -> np.ndarray:
    """
    Points center + t * radius * direction of the u-disks over positions v.

    Args:
        v: Complex positions, shape (m,)
        t_values: Radial fractions in [0, 1], shape (n_t,)
        directions: Unit complex directions, shape (n_w,)

    Returns:
        np.ndarray: States of shape (m * n_t * n_w, 4), ordered by v, then t,
        then direction
    """
    w = fiber_shift(params, v)
    radius_sq = -2.0 * shadow_function(params, v)
    radius = np.sqrt(np.maximum(radius_sq, 0.0))
    u = (-w[:, None, None]
         + t_values[None, :, None] * radius[:, None, None] * directions[None, None, :])
    v_full = np.broadcast_to(v[:, None, None], u.shape)
    return np.stack([v_full.real, v_full.imag, u.real, u.imag], axis=-1).reshape(-1, 4)


def _grid_positions(component: HillComponent, n_r: int) -> Iterator[np.ndarray]:
    fractions = np.arange(1, n_r + 1) / n_r
    for theta, radius in zip(component.thetas, component.radii):
        yield fractions * radius * np.exp(1j * theta)


def sample_filled_domain(params: Params, resolution=settings.DEFAULT_RESOLUTION,
                         component: Optional[HillComponent] = None) -> Iterator[np.ndarray]:
    """
    Stream points of W, the earth component of {K <= 0}.

    The first batch is the fibre over v = 0; then one batch per ray holding
    n_r positions, each with n_t * n_w fibre points at radial fractions
    (k + 1)/n_t. The order is fixed, so sample indices are reproducible.

    Args:
        params: Mass ratio and energy parameter (mu < 1, c > 3/2)
        resolution: (n_r, n_theta, n_w, n_t)
        component: Precomputed Hill component with n_theta rays

    Yields:
        np.ndarray: Batches of states, shape (m, 4)
    """
    params.require_compact()
    n_r, n_theta, n_w, n_t = validate_resolution(resolution)
    if component is None:
        component = HillComponent(params, n_theta)
    if not component.separated or component.max_radius < settings.MIN_DOMAIN_RADIUS:
        logger.info("empty filled domain for mu=%r, c=%r", params.mu, params.c)
        return

    t_values = np.arange(1, n_t + 1) / n_t
    directions = np.exp(2j * np.pi * np.arange(n_w) / n_w)
    yield fiber_points(params, np.zeros(1, dtype=complex), t_values, directions)
    for positions in _grid_positions(component, n_r):
        inside = shadow_function(params, positions) <= 0.0
        if not inside.all():
            logger.debug("dropping %d positions outside the projection", int((~inside).sum()))
        yield fiber_points(params, positions[inside], t_values, directions)


def sample_surface(params: Params, resolution=settings.DEFAULT_RESOLUTION,
                   component: Optional[HillComponent] = None) -> np.ndarray:
    """
    Points of Sigma: the fibre boundaries (t = 1) over the polar grid.

    Returns:
        np.ndarray: States of shape (N, 4); empty when the component degenerates
    """
    params.require_compact()
    n_r, n_theta, n_w, _ = validate_resolution(resolution)
    if component is None:
        component = HillComponent(params, n_theta)
    if not component.separated or component.max_radius < settings.MIN_DOMAIN_RADIUS:
        return np.empty((0, 4))
    directions = np.exp(2j * np.pi * np.arange(n_w) / n_w)
    ones = np.ones(1)
    batches = [fiber_points(params, np.zeros(1, dtype=complex), ones, directions)]
    for positions in _grid_positions(component, n_r):
        inside = shadow_function(params, positions) <= 0.0
        batches.append(fiber_points(params, positions[inside], ones, directions))
    return np.concatenate(batches)


def surface_point(params: Params, v: complex, phi: float) -> Optional[RegPoint]:
    """
    The point of Sigma over v in direction phi from the fibre centre.

    Returns:
        Optional[RegPoint]: None when v lies outside the projection of Sigma
    """
    shadow = float(shadow_function(params, v))
    if shadow > 0.0:
        return None
    w = complex(fiber_shift(params, v))
    u = -w + math.sqrt(-2.0 * shadow) * complex(math.cos(phi), math.sin(phi))
    return RegPoint.from_complex(v, u)


def max_surface_momentum(params: Params, resolution=settings.DEFAULT_RESOLUTION) -> float:
    points = sample_surface(params, resolution)
    if len(points) == 0:
        return 0.0
    return float(np.max(np.hypot(points[:, 2], points[:, 3])))


def surface_residual(params: Params, points: np.ndarray) -> np.ndarray:
    return np.abs(RegularizedSystem(params).regularized_hamiltonian_batch(points))
