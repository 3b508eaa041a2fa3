import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from config import settings
from src.core.dynamics import Params, RegPoint
from src.core.errors import IntegrationError, InvalidParamsError, OrbitSearchError
from src.core.flow import FlowIntegrator, IntegrationSettings, Section
from src.core.hill_region import HillComponent, momentum_magnitude, zero_momentum_energy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodicOrbit:
    """
    A periodic orbit through a point of Fix(rho) = {v2 = 0, u1 = 0}.

    Attributes:
        z0: Initial point on the fixed set of the reversor
        period: Period in regularized time
        closure_error: |flow(period)(z0) - z0|
        return_trace: Trace of the linearized return map of the section
            {v2 = 0} at z0, in the coordinates (v1, u1)
    """
    params: Params
    z0: RegPoint
    period: float
    closure_error: float
    return_trace: float

    def to_dict(self) -> Dict:
        return {
            'c': self.params.c,
            'mu': self.params.mu,
            'z0': [float(x) for x in self.z0.as_array()],
            'period': self.period,
            'closure_error': self.closure_error,
            'return_trace': self.return_trace,
        }


def circular_orbit_radii(c: float) -> Tuple[float, float]:
    """
    Radii of the two circular Kepler orbits on H = -c at mu = 0.

    In the rotating frame a circular orbit of radius r has
    H = -1/(2r) +- sqrt(r). With r = s^2 the two families solve
    2s^3 - 2cs^2 + 1 = 0 and 2s^3 + 2cs^2 - 1 = 0; each contributes its
    root inside the Hill region s <= 1/sqrt(c).

    Returns:
        Tuple[float, float]: (r for 2s^3 - 2cs^2 + 1 = 0,
        r for 2s^3 + 2cs^2 - 1 = 0)
    """
    if c <= 1.5:
        raise InvalidParamsError(f"c={c!r}: the energy parameter must exceed 3/2")
    limit = 1.0 / math.sqrt(c)
    radii = []
    for coefficients in ([2.0, -2.0 * c, 0.0, 1.0], [2.0, 2.0 * c, 0.0, -1.0]):
        f = lambda s: np.polyval(coefficients, s)
        roots = [float(s.real) for s in np.roots(coefficients)
                 if abs(s.imag) < 1e-12 and 0.0 < s.real <= limit]
        if not roots:
            raise OrbitSearchError(f"no circular orbit inside the Hill region for c={c!r}")
        s = min(roots)
        # polish on a small bracket around the eigenvalue estimate
        low, high = max(s - 1e-6, 1e-12), min(s + 1e-6, limit)
        if f(low) * f(high) < 0.0:
            s = brentq(f, low, high, xtol=1e-16, rtol=4 * np.finfo(float).eps)
        radii.append(s * s)
    return radii[0], radii[1]


def circular_orbit_state(c: float, family: int = 0) -> RegPoint:
    """
    Initial data of a circular orbit at mu = 0 on the fixed set of rho.

    Family 0 (2s^3 - 2cs^2 + 1 = 0) starts at v = (-s/sqrt 2, 0), family 1
    at v = (s/sqrt 2, 0); both with u = (0, 1/sqrt 2).
    """
    if family not in (0, 1):
        raise InvalidParamsError(f"family={family!r} must be 0 or 1")
    s = math.sqrt(circular_orbit_radii(c)[family])
    sign = -1.0 if family == 0 else 1.0
    return RegPoint(sign * s / math.sqrt(2.0), 0.0, 0.0, 1.0 / math.sqrt(2.0))


class SymmetricOrbitSearch:
    """
    Shooting for periodic orbits symmetric under the reversor rho.

    A point (v1, 0, 0, u2) of Fix(rho) with u2 solved from K = 0 is flowed to
    the next crossing of {v2 = 0}. If u1 vanishes there, the crossing is
    again on Fix(rho) and reflecting the half orbit by rho closes it, so the
    search is a scalar root problem for u1 in v1.
    """

    def __init__(self, params: Params, branch: int = 1,
                 integration: Optional[IntegrationSettings] = None):
        """
        Initialize the search.

        Args:
            params: Mass ratio and energy parameter (mu < 1, c > 3/2)
            branch: +1 for u2 >= 0, -1 for u2 <= 0
            integration: Tolerances; defaults to ORBIT_RTOL / ORBIT_ATOL
        """
        params.require_compact()
        if branch not in (1, -1):
            raise InvalidParamsError(f"branch={branch!r} must be +1 or -1")
        self.params = params
        self.branch = branch
        # earth-component radius along the positive and negative v1 axis
        self.axis_radii = HillComponent(params, 2).radii
        self.integrator = FlowIntegrator(
            params, integration or IntegrationSettings(rtol=settings.ORBIT_RTOL,
                                                       atol=settings.ORBIT_ATOL))

    def initial_point(self, v1: float) -> RegPoint:
        """
        The point of Fix(rho) over (v1, 0) on the chosen branch.

        Raises:
            OrbitSearchError: if (v1, 0) is outside the earth component
        """
        limit = self.axis_radii[0] if v1 >= 0.0 else self.axis_radii[1]
        if abs(v1) > limit:
            raise OrbitSearchError(f"v1={v1!r} lies outside the earth component (radius {limit:.6g})")
        magnitude = momentum_magnitude(self.params, complex(v1, 0.0), (0.0, float(self.branch)))
        if magnitude is None:
            raise OrbitSearchError(f"v1={v1!r} lies outside the Hill region")
        return RegPoint(float(v1), 0.0, 0.0, self.branch * magnitude)

    def _start_section(self, z0: RegPoint) -> Section:
        velocity = self.integrator.system.vector_field_array(z0.as_array())
        if abs(velocity[1]) <= settings.TRANSVERSALITY_TOL:
            raise OrbitSearchError(f"the flow is tangent to v2 = 0 at {z0}")
        return Section.coordinate('v2', 0.0, int(np.sign(velocity[1])))

    def half_orbit(self, v1: float):
        """
        Flow from Fix(rho) over v1 to the next crossing of {v2 = 0}.

        Returns:
            CrossingEvent: the crossing, whose u1 is the shooting residual
        """
        z0 = self.initial_point(v1)
        start = self._start_section(z0)
        # the next crossing of v2 = 0 runs against the starting direction
        opposite = Section(start.normal, 0.0, -start.orientation)
        try:
            return self.integrator.next_crossing(z0, opposite)
        except IntegrationError as exc:
            raise OrbitSearchError(f"shooting from v1={v1!r} failed: {exc}") from exc

    def shooting_residual(self, v1: float) -> float:
        return self.half_orbit(v1).z.u1

    def find(self, v1_bracket: Tuple[float, float],
             tol: float = settings.ORBIT_U1_TOL) -> PeriodicOrbit:
        """
        Locate a symmetric periodic orbit with v1 in the bracket.

        Args:
            v1_bracket: (v1_low, v1_high) on the v1 axis inside the Hill region
            tol: Bound on |u1| at the half-period crossing

        Returns:
            PeriodicOrbit: with period twice the half-orbit time

        Raises:
            OrbitSearchError: no sign change of u1 over the bracket, a failed
                integration, or a non-transversal crossing
        """
        low, high = sorted(float(x) for x in v1_bracket)
        f_low, f_high = self.shooting_residual(low), self.shooting_residual(high)
        if f_low * f_high > 0.0:
            raise OrbitSearchError(
                f"u1 does not change sign over [{low!r}, {high!r}] "
                f"(u1 = {f_low:.3g}, {f_high:.3g})")
        v1 = brentq(self.shooting_residual, low, high, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        half = self.half_orbit(v1)
        if abs(half.z.u1) >= tol:
            raise OrbitSearchError(f"shooting stalled at v1={v1!r} with |u1| = {abs(half.z.u1):.3g}")

        z0 = self.initial_point(v1)
        period = 2.0 * half.t
        try:
            closed = self.integrator.flow(z0, period)
        except IntegrationError as exc:
            raise OrbitSearchError(f"closing the orbit failed: {exc}") from exc
        closure_error = float(np.linalg.norm(closed.as_array() - z0.as_array()))
        orbit = PeriodicOrbit(self.params, z0, period, closure_error, self.return_trace(z0))
        logger.info("symmetric orbit at v1=%r: period=%.12g, closure error %.3g, trace %.6g",
                    v1, period, closure_error, orbit.return_trace)
        return orbit

    def _section_point(self, v1: float, u1: float) -> RegPoint:
        """Point of {v2 = 0, K = 0} over (v1, u1) on the chosen branch."""
        beta = 2.0 * v1 ** 3 - self.params.mu * v1
        e = float(zero_momentum_energy(self.params, complex(v1, 0.0)))
        discriminant = beta * beta - u1 * u1 - 2.0 * e
        if discriminant < 0.0:
            raise OrbitSearchError(f"(v1, u1) = ({v1!r}, {u1!r}) is not over the surface")
        return RegPoint(v1, 0.0, u1, -beta + self.branch * math.sqrt(discriminant))

    def return_trace(self, z0: RegPoint, step: float = settings.MONODROMY_STEP) -> float:
        """
        Trace of the linearized return map of {v2 = 0} at z0.

        The return map is written in the section coordinates (v1, u1), with
        u2 recovered from K = 0; its Jacobian comes from central differences.
        """
        section = self._start_section(z0)

        def returned(v1, u1):
            event = self.integrator.next_crossing(self._section_point(v1, u1), section)
            return np.array([event.z.v1, event.z.u1])

        try:
            column_v1 = (returned(z0.v1 + step, z0.u1) - returned(z0.v1 - step, z0.u1)) / (2 * step)
            column_u1 = (returned(z0.v1, z0.u1 + step) - returned(z0.v1, z0.u1 - step)) / (2 * step)
        except IntegrationError as exc:
            raise OrbitSearchError(f"return map linearization failed: {exc}") from exc
        return float(column_v1[0] + column_u1[1])


def find_symmetric_orbit(params: Params, v1_bracket: Tuple[float, float],
                         tol: float = settings.ORBIT_U1_TOL, branch: int = 1) -> PeriodicOrbit:
    return SymmetricOrbitSearch(params, branch).find(v1_bracket, tol)


def default_orbit_bracket(params: Params) -> Tuple[float, float]:
    """
    A v1 bracket on the negative axis, between 0.75 and 0.95 of the Hill
    radius along that ray; it holds the circular orbit 2s^3 - 2cs^2 + 1 = 0
    when mu = 0.
    """
    component = HillComponent(params, 2, region='zero_momentum')
    radius = float(component.radii[1])
    return -0.95 * radius, -0.75 * radius
