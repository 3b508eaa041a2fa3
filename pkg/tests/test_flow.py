import unittest
import math
import numpy as np
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.dynamics import Params, RegPoint, RegularizedSystem, Tangent4
from src.core.errors import InvalidParamsError, OffSurfaceError, ReturnMapError
from src.core.flow import (FlowIntegrator, IntegrationSettings, Section, integrate, return_map,
                           section_crossings)
from src.core.hill_region import surface_point
from src.core.orbits import SymmetricOrbitSearch, circular_orbit_state

TIGHT = IntegrationSettings(rtol=1e-12, atol=1e-14)


class TestIntegrationSettings(unittest.TestCase):
    def test_rejects_nonpositive_tolerances(self):
        """Tolerances and max_step must be positive."""
        with self.assertRaises(InvalidParamsError):
            IntegrationSettings(rtol=0.0)
        with self.assertRaises(InvalidParamsError):
            IntegrationSettings(drift_bound=-1e-8)
        with self.assertRaises(InvalidParamsError):
            IntegrationSettings(max_step=0.0)


class TestIntegrate(unittest.TestCase):
    def test_off_surface_start(self):
        """Initial data with |K| >= 1e-8 is rejected."""
        with self.assertRaises(OffSurfaceError):
            integrate(Params(0.5, 2.0), RegPoint(0.0, 0.0, 0.0, 0.0), 1.0)

    def test_equilibrium_at_unit_mass_ratio(self):
        """For mu = 1 the origin is on {K = 0} and does not move."""
        trajectory = integrate(Params(1.0, 2.0), RegPoint(0.0, 0.0, 0.0, 0.0), 5.0)
        np.testing.assert_array_equal(trajectory.states, 0.0)
        self.assertEqual(trajectory.times[-1], 5.0)

    def test_energy_conservation(self):
        """mu = 0.9, c = 1.8: |K| stays below 1e-8 up to t = 100."""
        z0 = RegPoint(0.0, 0.0, 0.0, math.sqrt(0.1))
        trajectory = integrate(Params(0.9, 1.8), z0, 100.0)
        self.assertLess(trajectory.max_residual, 1e-8)
        self.assertTrue(np.all(np.diff(trajectory.times) > 0.0))
        self.assertEqual(trajectory.times[-1], 100.0)

    def test_backward_run(self):
        """Backward runs have decreasing times."""
        params = Params(0.3, 2.2)
        trajectory = integrate(params, surface_point(params, 0.1 + 0.05j, 0.7), -3.0)
        self.assertTrue(np.all(np.diff(trajectory.times) < 0.0))

    def test_frame(self):
        """The trajectory table lists t, the coordinates and K."""
        params = Params(0.3, 2.2)
        frame = integrate(params, surface_point(params, 0.1 + 0.05j, 0.7), 1.0).to_frame()
        self.assertEqual(list(frame.columns), ['t', 'v1', 'v2', 'u1', 'u2', 'K'])
        self.assertEqual(frame['t'].iloc[0], 0.0)

    def test_tighter_tolerance_reduces_drift(self):
        """Tightening the tolerances reduces the drift."""
        params = Params(0.3, 2.2)
        z0 = surface_point(params, 0.15 - 0.1j, 2.0)
        loose = integrate(params, z0, 20.0, IntegrationSettings(rtol=1e-6, atol=1e-8, drift_bound=1e-2))
        tight = integrate(params, z0, 20.0, TIGHT)
        self.assertLess(tight.max_residual, loose.max_residual)

    def test_fifth_order_convergence(self):
        """With the step pinned by max_step, halving it divides the end-point error by about 32."""
        params = Params(0.3, 2.2)
        z0 = surface_point(params, 0.1 + 0.05j, 0.7)
        reference = integrate(params, z0, 2.0, IntegrationSettings(rtol=1e-13, atol=1e-15)).states[-1]
        errors = []
        for step in (0.1, 0.05):
            # tolerances loose enough that max_step always limits the step
            fixed = IntegrationSettings(rtol=1.0, atol=1.0, drift_bound=1.0, max_step=step)
            errors.append(np.linalg.norm(integrate(params, z0, 2.0, fixed).states[-1] - reference))
        ratio = errors[0] / errors[1]
        self.assertGreater(ratio, 32.0 / 4.0)
        self.assertLess(ratio, 32.0 * 4.0)


class TestSymmetries(unittest.TestCase):
    def setUp(self):
        """Set up the test environment."""
        self.params = Params(0.3, 2.2)
        self.integrator = FlowIntegrator(self.params, TIGHT)
        self.z0 = surface_point(self.params, 0.12 + 0.08j, 1.1)

    def test_reversibility(self):
        """rho(flow_t(rho(z))) = flow_{-t}(z)."""
        for t in (2.5, 10.0):
            forward = RegularizedSystem.reversor(self.integrator.flow(RegularizedSystem.reversor(self.z0), t))
            backward = self.integrator.flow(self.z0, -t)
            np.testing.assert_allclose(forward.as_array(), backward.as_array(), atol=1e-8)

    def test_double_cover(self):
        """flow_t(-z) = -flow_t(z)."""
        image = self.integrator.flow(self.z0, 7.0)
        flipped = self.integrator.flow(RegularizedSystem.double_cover(self.z0), 7.0)
        np.testing.assert_allclose(flipped.as_array(), -image.as_array(), atol=1e-8)


class TestSections(unittest.TestCase):
    def setUp(self):
        """Set up the test environment."""
        self.params = Params(0.0, 1.8)
        self.z0 = circular_orbit_state(1.8)
        self.section = Section.coordinate('v2', 0.0, 1)

    def test_section_validation(self):
        """Normals must be unit vectors and orientations +1 or -1."""
        with self.assertRaises(InvalidParamsError):
            Section(Tangent4(0.0, 2.0, 0.0, 0.0))
        with self.assertRaises(InvalidParamsError):
            Section(Tangent4(0.0, 1.0, 0.0, 0.0), orientation=0)
        with self.assertRaises(InvalidParamsError):
            Section.coordinate('w1')

    def test_section_never_reached(self):
        """A hyperplane outside the component is never crossed."""
        report = section_crossings(self.params, self.z0, 20.0, Section.coordinate('v1', 5.0))
        self.assertEqual(len(report), 0)
        self.assertEqual(report.tangential, [])

    def test_circular_orbit_period(self):
        """Crossing times of the circular orbit are equally spaced."""
        report = section_crossings(self.params, self.z0, 30.0, self.section, TIGHT)
        self.assertGreaterEqual(len(report), 4)
        gaps = np.diff(np.concatenate([[0.0], report.times]))
        np.testing.assert_allclose(gaps, gaps[0], atol=1e-8)
        for event in report:
            self.assertLess(abs(event.z.v2), 1e-10)
            self.assertGreater(event.transversality, 1e-10)

    def test_both_orientations(self):
        """The opposite orientation picks the crossings at half period."""
        forward = section_crossings(self.params, self.z0, 12.0, self.section, TIGHT)
        backward = section_crossings(self.params, self.z0, 12.0,
                                     Section.coordinate('v2', 0.0, -1), TIGHT)
        self.assertAlmostEqual(backward.times[0], 0.5 * forward.times[0], places=7)
        self.assertLess(backward[0].transversality, 0.0)


class TestReturnMap(unittest.TestCase):
    def setUp(self):
        """Set up the test environment."""
        self.params = Params(0.0, 1.8)
        self.section = Section.coordinate('v2', 0.0, 1)

    def test_fixed_point(self):
        """The circular orbit is a fixed point of the return map."""
        z0 = circular_orbit_state(1.8)
        for point in return_map(self.params, self.section, z0, 3, TIGHT):
            np.testing.assert_allclose(point.as_array(), z0.as_array(), atol=1e-6)

    def test_zero_iterates(self):
        """n = 0 gives no iterates."""
        self.assertEqual(return_map(self.params, self.section, circular_orbit_state(1.8), 0), [])

    def test_nearby_orbit_stays_on_surface(self):
        """Iterates of a nearby point stay on the section and on {K = 0}."""
        z0 = circular_orbit_state(1.8)
        start = SymmetricOrbitSearch(self.params).initial_point(z0.v1 + 1e-3)
        system = RegularizedSystem(self.params)
        iterates = return_map(self.params, self.section, start, 50, TIGHT)
        self.assertEqual(len(iterates), 50)
        for point in iterates:
            self.assertLess(abs(point.v2), 1e-10)
            self.assertLess(abs(system.regularized_hamiltonian(point)), 1e-8)

    def test_start_off_section(self):
        """The start point must lie on the section."""
        z0 = circular_orbit_state(1.8)
        with self.assertRaises(OffSurfaceError):
            return_map(self.params, Section.coordinate('v2', 0.1), z0, 1)

    def test_failure_reports_iterate_index(self):
        """An integration failure names the iterate it happened in."""
        strict = IntegrationSettings(drift_bound=1e-300)
        with self.assertRaises(ReturnMapError) as context:
            return_map(Params(0.3, 2.2), self.section, SymmetricOrbitSearch(Params(0.3, 2.2)).initial_point(-0.2),
                       5, strict)
        self.assertEqual(context.exception.index, 0)

    def test_rejects_negative_count(self):
        """n must be a nonnegative integer."""
        with self.assertRaises(InvalidParamsError):
            return_map(self.params, self.section, circular_orbit_state(1.8), -1)


if __name__ == '__main__':
    unittest.main()
