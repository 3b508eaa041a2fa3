import unittest
import math
import numpy as np
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from scipy.optimize import bisect

from src.core.dynamics import Params, RegPoint, RegularizedSystem, levi_civita
from src.core.errors import InvalidParamsError, OrbitSearchError
from src.core.flow import FlowIntegrator, IntegrationSettings
from src.core.orbits import (SymmetricOrbitSearch, circular_orbit_radii, circular_orbit_state,
                             default_orbit_bracket, find_symmetric_orbit)


def rotating_kepler_radius(c, sign):
    """Root of -1/(2r) + sign * sqrt(r) = -c inside the Hill region, by bisection."""
    f = lambda r: -0.5 / r + sign * math.sqrt(r) + c
    return bisect(f, 1e-3, 1.0 / c, xtol=1e-15)


class TestCircularOrbits(unittest.TestCase):
    def test_radii_against_energy_equation(self):
        """The two radii solve H = -1/(2r) -+ sqrt(r) = -c."""
        for c in (1.6, 1.8, 2.5):
            first, second = circular_orbit_radii(c)
            self.assertAlmostEqual(first, rotating_kepler_radius(c, -1.0), places=12)
            self.assertAlmostEqual(second, rotating_kepler_radius(c, 1.0), places=12)

    def test_state_on_surface(self):
        """Both circular states lie on {K = 0} at mu = 0."""
        system = RegularizedSystem(Params(0.0, 1.8))
        for family in (0, 1):
            z = circular_orbit_state(1.8, family)
            self.assertLess(abs(system.regularized_hamiltonian(z)), 1e-14)

    def test_rejects_low_energy(self):
        """c <= 3/2 and unknown families are rejected."""
        with self.assertRaises(InvalidParamsError):
            circular_orbit_radii(1.5)
        with self.assertRaises(InvalidParamsError):
            circular_orbit_state(1.8, family=2)


class TestSymmetricOrbit(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        """Find the symmetric orbit once for mu = 0, c = 1.8."""
        cls.params = Params(0.0, 1.8)
        cls.orbit = find_symmetric_orbit(cls.params, default_orbit_bracket(cls.params))

    def test_orbit_closes(self):
        """closure_error < 1e-6 and the start point is on {K = 0}."""
        self.assertLess(self.orbit.closure_error, 1e-6)
        self.assertLess(abs(RegularizedSystem(self.params).regularized_hamiltonian(self.orbit.z0)), 1e-10)
        self.assertEqual(self.orbit.z0.v2, 0.0)
        self.assertEqual(self.orbit.z0.u1, 0.0)

    def test_image_is_circle(self):
        """In the rotating frame the orbit is the circle of radius s^2."""
        radius = abs(levi_civita(self.orbit.z0).q)
        self.assertAlmostEqual(radius, rotating_kepler_radius(1.8, -1.0), places=6)
        integrator = FlowIntegrator(self.params, IntegrationSettings(rtol=1e-12, atol=1e-14))
        trajectory = integrator.integrate(self.orbit.z0, self.orbit.period)
        radii = 2.0 * np.hypot(trajectory.states[:, 0], trajectory.states[:, 1]) ** 2
        np.testing.assert_allclose(radii, radius, atol=1e-6)

    def test_matches_circular_state(self):
        """The shooting result is the known circular initial point."""
        np.testing.assert_allclose(self.orbit.z0.as_array(), circular_orbit_state(1.8).as_array(), atol=1e-6)

    def test_reversor_symmetry(self):
        """rho maps the orbit onto itself: flow_t(z0) and flow_{-t}(z0) are mirror images."""
        integrator = FlowIntegrator(self.params, IntegrationSettings(rtol=1e-12, atol=1e-14))
        for t in (0.3, 1.7, 0.4 * self.orbit.period):
            forward = integrator.flow(self.orbit.z0, t)
            backward = integrator.flow(self.orbit.z0, -t)
            np.testing.assert_allclose(RegularizedSystem.reversor(forward).as_array(),
                                       backward.as_array(), atol=1e-8)

    def test_return_trace(self):
        """The trace of the linearized return map is finite."""
        self.assertTrue(math.isfinite(self.orbit.return_trace))

    def test_to_dict(self):
        """The orbit record lists parameters, start point and period."""
        record = self.orbit.to_dict()
        self.assertEqual(sorted(record), ['c', 'closure_error', 'mu', 'period', 'return_trace', 'z0'])
        self.assertEqual(len(record['z0']), 4)


class TestShootingErrors(unittest.TestCase):
    def test_no_sign_change(self):
        """A bracket without a sign change of u1 is reported."""
        with self.assertRaises(OrbitSearchError):
            find_symmetric_orbit(Params(0.0, 1.8), (-0.46, -0.45))

    def test_bracket_outside_component(self):
        """Bracket ends beyond the Hill radius are rejected."""
        with self.assertRaises(OrbitSearchError):
            find_symmetric_orbit(Params(0.0, 1.8), (-0.9, -0.8))

    def test_rejects_bad_branch(self):
        """branch must be +1 or -1."""
        with self.assertRaises(InvalidParamsError):
            SymmetricOrbitSearch(Params(0.0, 1.8), branch=0)

    def test_rejects_invalid_params(self):
        """mu = 1 has no earth component to search."""
        with self.assertRaises(InvalidParamsError):
            SymmetricOrbitSearch(Params(1.0, 1.8))

    def test_initial_point_on_surface(self):
        """Points of Fix(rho) are solved onto {K = 0}."""
        params = Params(0.2, 2.0)
        search = SymmetricOrbitSearch(params)
        z = search.initial_point(-0.25)
        self.assertIsInstance(z, RegPoint)
        self.assertGreaterEqual(z.u2, 0.0)
        self.assertLess(abs(RegularizedSystem(params).regularized_hamiltonian(z)), 1e-12)


if __name__ == '__main__':
    unittest.main()
