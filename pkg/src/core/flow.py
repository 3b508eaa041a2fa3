"""
Integration of the regularized flow on {K = 0}.

The flow is that of K itself, a reparameterization of the physical flow, so
every time reported here (trajectory times, crossing times, periods) is in
regularized time.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import RK45, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import bisect

from config import settings
from src.core.dynamics import COORDINATES, Params, RegPoint, RegularizedSystem, Tangent4
from src.core.errors import (DriftExceededError, IntegrationError, InvalidParamsError,
                             OffSurfaceError, ReturnMapError, SingularApproachError,
                             SingularityError, StepUnderflowError)
from src.utils.validators import validate_tolerance

logger = logging.getLogger(__name__)

# Crossings this close to the start of a run belong to the start point
_START_EXCLUSION = 1e-9
_NEWTON_STEPS = 3


@dataclass(frozen=True)
class IntegrationSettings:
    """Tolerances of one integration run; recorded with the trajectory."""
    rtol: float = settings.DEFAULT_RTOL
    atol: float = settings.DEFAULT_ATOL
    drift_bound: float = settings.DEFAULT_DRIFT_BOUND
    on_surface_tol: float = settings.ON_SURFACE_TOL
    max_step: float = math.inf

    def __post_init__(self):
        for name in ('rtol', 'atol', 'drift_bound', 'on_surface_tol'):
            validate_tolerance(name, getattr(self, name))
        if not self.max_step > 0.0:
            raise InvalidParamsError(f"max_step={self.max_step!r} must be positive")


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    z: RegPoint
    K: float


@dataclass
class Trajectory:
    """
    Accepted integration steps with the K residual at each.

    Times are strictly increasing for forward runs and strictly decreasing
    for backward runs.
    """
    params: Params
    samples: List[TrajectorySample]
    settings: IntegrationSettings

    @property
    def times(self) -> np.ndarray:
        return np.array([sample.t for sample in self.samples])

    @property
    def states(self) -> np.ndarray:
        return np.array([sample.z.as_array() for sample in self.samples]).reshape(-1, 4)

    @property
    def max_residual(self) -> float:
        return max(abs(sample.K) for sample in self.samples)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=list(COORDINATES))
        frame.insert(0, 't', self.times)
        frame['K'] = [sample.K for sample in self.samples]
        return frame


@dataclass(frozen=True)
class Section:
    """
    The affine hyperplane {<normal, z> = offset} with a crossing orientation.

    Only crossings whose velocity has a normal component of the sign
    `orientation` are counted.
    """
    normal: Tangent4
    offset: float = 0.0
    orientation: int = 1

    def __post_init__(self):
        norm = float(np.linalg.norm(self.normal.as_array()))
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParamsError(f"section normal must have unit length, got {norm!r}")
        if self.orientation not in (1, -1):
            raise InvalidParamsError(f"orientation={self.orientation!r} must be +1 or -1")

    @classmethod
    def coordinate(cls, name: str, offset: float = 0.0, orientation: int = 1) -> 'Section':
        """The section {z[name] = offset}, e.g. Section.coordinate('v2')."""
        if name not in COORDINATES:
            raise InvalidParamsError(f"unknown coordinate {name!r}; expected one of {COORDINATES}")
        return cls(Tangent4.from_array(np.eye(4)[COORDINATES.index(name)]), offset, orientation)

    def value(self, y) -> float:
        return float(np.dot(self.normal.as_array(), y) - self.offset)


@dataclass(frozen=True)
class CrossingEvent:
    t: float
    z: RegPoint
    transversality: float


@dataclass
class CrossingReport:
    """Oriented crossings of a run, plus the tangential ones kept apart."""
    crossings: List[CrossingEvent] = field(default_factory=list)
    tangential: List[CrossingEvent] = field(default_factory=list)

    def __iter__(self):
        return iter(self.crossings)

    def __len__(self):
        return len(self.crossings)

    def __getitem__(self, index):
        return self.crossings[index]

    @property
    def times(self) -> np.ndarray:
        return np.array([event.t for event in self.crossings])


@dataclass(frozen=True)
class _Step:
    t0: float
    y0: np.ndarray
    f0: np.ndarray
    t1: float
    y1: np.ndarray
    f1: np.ndarray


class FlowIntegrator:
    """
    Adaptive Dormand-Prince 5(4) integration of the Hamiltonian vector field
    of K, with energy-drift monitoring and section crossing detection.

    scipy's RK45 is driven one accepted step at a time so that the K
    residual can be checked after every step and crossings can be located
    between steps.
    """

    def __init__(self, params: Params, integration: Optional[IntegrationSettings] = None):
        """
        Initialize the integrator.

        Args:
            params: Mass ratio and energy parameter
            integration: Tolerances; defaults from config.settings
        """
        self.params = params
        self.settings = integration or IntegrationSettings()
        self.system = RegularizedSystem(params, guard=settings.INTEGRATION_SINGULARITY_GUARD)

    def _rhs(self, t, y):
        try:
            return self.system.vector_field_array(y)
        except SingularityError as exc:
            raise SingularApproachError(str(exc), t=t, z=RegPoint.from_array(y)) from exc

    def _residual(self, y) -> float:
        try:
            return float(self.system.regularized_hamiltonian_batch(y))
        except SingularityError as exc:
            raise SingularApproachError(str(exc), z=RegPoint.from_array(y)) from exc

    def check_on_surface(self, z: RegPoint) -> float:
        """
        Raises:
            OffSurfaceError: if |K(z)| exceeds the on-surface tolerance
        """
        residual = self._residual(z.as_array())
        if abs(residual) >= self.settings.on_surface_tol:
            raise OffSurfaceError(
                f"initial data is off the surface: |K(z0)| = {abs(residual):.3g} "
                f">= {self.settings.on_surface_tol:g}")
        return residual

    def _steps(self, t0: float, y0: np.ndarray, t_end: float) -> Iterator[_Step]:
        """Accepted steps from (t0, y0) towards t_end, drift checked."""
        if t_end == t0:
            return
        solver = RK45(self._rhs, t0, np.array(y0, dtype=float), t_end,
                      rtol=self.settings.rtol, atol=self.settings.atol,
                      max_step=self.settings.max_step)
        t_prev, y_prev = t0, np.array(y0, dtype=float)
        f_prev = self._rhs(t0, y_prev)
        while solver.status == 'running':
            message = solver.step()
            if solver.status == 'failed':
                raise StepUnderflowError(f"integration failed at t={solver.t!r}: {message}",
                                         t=solver.t, z=RegPoint.from_array(solver.y))
            t, y = float(solver.t), solver.y.copy()
            residual = self._residual(y)
            if abs(residual) > self.settings.drift_bound:
                raise DriftExceededError(
                    f"|K| = {abs(residual):.3g} exceeds the drift bound "
                    f"{self.settings.drift_bound:g} at t={t!r}", t=t, z=RegPoint.from_array(y))
            f = self._rhs(t, y)
            yield _Step(t_prev, y_prev, f_prev, t, y, f)
            t_prev, y_prev, f_prev = t, y, f

    def integrate(self, z0: RegPoint, t_end: float, t0: float = 0.0) -> Trajectory:
        """
        Integrate from z0 to t_end, recording every accepted step.

        Args:
            z0: Initial state with |K(z0)| below the on-surface tolerance
            t_end: Final time; may be smaller than t0 for backward runs
            t0: Initial time

        Returns:
            Trajectory: samples at t0 and every accepted step

        Raises:
            OffSurfaceError: if z0 is not on {K = 0}
            DriftExceededError, SingularApproachError, StepUnderflowError
        """
        residual = self.check_on_surface(z0)
        samples = [TrajectorySample(float(t0), z0, residual)]
        for step in self._steps(t0, z0.as_array(), t_end):
            samples.append(TrajectorySample(step.t1, RegPoint.from_array(step.y1),
                                            self._residual(step.y1)))
        trajectory = Trajectory(self.params, samples, self.settings)
        logger.debug("integrated %d steps to t=%r, max |K| = %.3g",
                     len(samples) - 1, t_end, trajectory.max_residual)
        return trajectory

    def flow(self, z0: RegPoint, t: float) -> RegPoint:
        """The time-t image of z0 (no on-surface precondition)."""
        if t == 0.0:
            return z0
        return RegPoint.from_array(self._propagate(0.0, z0.as_array(), t))

    def _propagate(self, t0: float, y0: np.ndarray, dt: float) -> np.ndarray:
        if dt == 0.0:
            return np.array(y0, dtype=float)
        solution = solve_ivp(self._rhs, (t0, t0 + dt), y0, method='RK45',
                             rtol=self.settings.rtol, atol=self.settings.atol)
        if not solution.success:
            raise StepUnderflowError(f"propagation failed: {solution.message}", t=t0 + dt)
        return solution.y[:, -1]

    def _locate(self, step: _Step, section: Section) -> CrossingEvent:
        """Refine a crossing inside one accepted step."""
        ordered = sorted([(step.t0, step.y0, step.f0), (step.t1, step.y1, step.f1)],
                         key=lambda item: item[0])
        times = [item[0] for item in ordered]
        spline = CubicHermiteSpline(times, np.array([item[1] for item in ordered]),
                                    np.array([item[2] for item in ordered]))
        g = lambda s: section.value(spline(s))
        if g(times[0]) == 0.0:
            t_cross = times[0]
        elif g(times[1]) == 0.0:
            t_cross = times[1]
        else:
            t_cross = bisect(g, times[0], times[1], xtol=1e-15, maxiter=200)

        y = self._propagate(step.t0, step.y0, t_cross - step.t0)
        velocity = self._rhs(t_cross, y)
        transversality = float(np.dot(section.normal.as_array(), velocity))
        if abs(transversality) > settings.TRANSVERSALITY_TOL:
            for _ in range(_NEWTON_STEPS):
                gap = section.value(y)
                if abs(gap) < settings.SECTION_TOL:
                    break
                dt = -gap / transversality
                y = self._propagate(t_cross, y, dt)
                t_cross += dt
                velocity = self._rhs(t_cross, y)
                transversality = float(np.dot(section.normal.as_array(), velocity))
            if abs(section.value(y)) >= settings.SECTION_TOL:
                logger.warning("crossing at t=%r has section residual %.3g",
                               t_cross, abs(section.value(y)))
        return CrossingEvent(float(t_cross), RegPoint.from_array(y), transversality)

    def _crossings(self, t0: float, y0: np.ndarray, t_end: float,
                   section: Section) -> Iterator[CrossingEvent]:
        """Every sign change of the section function, oriented or not."""
        for step in self._steps(t0, y0, t_end):
            g0, g1 = section.value(step.y0), section.value(step.y1)
            if g0 == 0.0 or not (g1 == 0.0 or g0 * g1 < 0.0):
                continue
            event = self._locate(step, section)
            if abs(event.t - t0) <= _START_EXCLUSION:
                continue
            yield event

    def section_crossings(self, z0: RegPoint, t_end: float, section: Section) -> CrossingReport:
        """
        Crossings of a section along the trajectory from z0 to t_end.

        Sign changes of <normal, z> - offset between accepted steps are
        located by bisection on the cubic Hermite interpolant of the step,
        then the state is propagated there from the step start and pushed
        onto the section by at most three Newton corrections in time.

        Args:
            z0: Initial state on {K = 0}
            t_end: Final time
            section: Hyperplane and orientation

        Returns:
            CrossingReport: crossings with the section's orientation in time
            order, and tangential crossings (|transversality| at most
            TRANSVERSALITY_TOL) listed separately
        """
        self.check_on_surface(z0)
        report = CrossingReport()
        for event in self._crossings(0.0, z0.as_array(), t_end, section):
            if abs(event.transversality) <= settings.TRANSVERSALITY_TOL:
                logger.warning("tangential crossing at t=%r (transversality %.3g)",
                               event.t, event.transversality)
                report.tangential.append(event)
            elif np.sign(event.transversality) == section.orientation:
                report.crossings.append(event)
        return report

    def next_crossing(self, z0: RegPoint, section: Section, t0: float = 0.0,
                      max_time: float = settings.RETURN_MAP_MAX_TIME) -> CrossingEvent:
        """
        First oriented, transversal crossing after t0.

        Raises:
            IntegrationError: if no crossing occurs within max_time
        """
        for event in self._crossings(t0, z0.as_array(), t0 + max_time, section):
            if (abs(event.transversality) > settings.TRANSVERSALITY_TOL
                    and np.sign(event.transversality) == section.orientation):
                return event
            if abs(event.transversality) <= settings.TRANSVERSALITY_TOL:
                logger.warning("skipping tangential crossing at t=%r", event.t)
        raise IntegrationError(f"no oriented crossing within time {max_time!r}", t=t0 + max_time)

    def return_map(self, section: Section, z0: RegPoint, n: int) -> List[RegPoint]:
        """
        Iterate the return map of a section.

        Args:
            section: Hyperplane and orientation
            z0: Start point on the section and on {K = 0}
            n: Number of iterates

        Returns:
            List[RegPoint]: the first n oriented crossings after z0

        Raises:
            OffSurfaceError: if z0 is off the surface or off the section
            ReturnMapError: on integration failure, with the iterate index
        """
        if int(n) != n or n < 0:
            raise InvalidParamsError(f"n={n!r} must be a nonnegative integer")
        self.check_on_surface(z0)
        if abs(section.value(z0.as_array())) >= settings.ON_SURFACE_TOL:
            raise OffSurfaceError(f"z0 is off the section by {abs(section.value(z0.as_array())):.3g}")

        iterates, t, current = [], 0.0, z0
        for index in range(int(n)):
            try:
                event = self.next_crossing(current, section, t0=t)
            except IntegrationError as exc:
                raise ReturnMapError(f"return map iterate {index}: {exc}", index,
                                     t=exc.t, z=exc.z) from exc
            iterates.append(event.z)
            t, current = event.t, event.z
        logger.debug("return map: %d iterates, last at t=%r", len(iterates), t)
        return iterates


def integrate(params: Params, z0: RegPoint, t_end: float,
              tol: Optional[IntegrationSettings] = None) -> Trajectory:
    return FlowIntegrator(params, tol).integrate(z0, t_end)


def section_crossings(params: Params, z0: RegPoint, t_end: float, section: Section,
                      tol: Optional[IntegrationSettings] = None) -> CrossingReport:
    return FlowIntegrator(params, tol).section_crossings(z0, t_end, section)


def return_map(params: Params, section: Section, z0: RegPoint, n: int,
               tol: Optional[IntegrationSettings] = None) -> List[RegPoint]:
    return FlowIntegrator(params, tol).return_map(section, z0, n)
