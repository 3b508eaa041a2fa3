import unittest
import io
import json
import os
import shutil
import sys
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from unittest import mock

import pandas as pd

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli import EXIT_DEGENERATE, EXIT_INTEGRATION, EXIT_INVALID, EXIT_OK, EXIT_WITNESS, main

SMALL = ['--resolution', '12', '32', '12', '4']


def run(argv):
    """Run the command line and capture (exit code, stdout)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue()


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        """Set up the test environment."""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up the test environment."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_lagrange(self):
        """The five points are printed sorted by value."""
        code, out = run(['lagrange', '--mu', '0.5'])
        self.assertEqual(code, EXIT_OK)
        df = pd.read_csv(io.StringIO(out))
        self.assertEqual(list(df.columns), ['label', 'q1', 'q2', 'value'])
        self.assertEqual(df['label'].iloc[0], 'L1')
        self.assertAlmostEqual(df['q1'].iloc[0], 0.5, places=12)
        self.assertAlmostEqual(df['value'].iloc[0], -2.0, places=12)
        self.assertTrue(df['value'].is_monotonic_increasing)

    def test_lagrange_small_mass_ratio(self):
        """The lowest value approaches -3/2 for small mu."""
        code, out = run(['lagrange', '--mu', '1e-4'])
        self.assertEqual(code, EXIT_OK)
        self.assertLess(abs(pd.read_csv(io.StringIO(out))['value'].iloc[0] + 1.5), 0.05)

    def test_lagrange_rejects_boundary(self):
        """mu = 0 has a critical circle and is rejected."""
        self.assertEqual(run(['lagrange', '--mu', '0'])[0], EXIT_INVALID)

    def test_certify_convex(self):
        """Near mu = 1 the certificate is convex and the exit code 0."""
        code, out = run(['certify', '--c', '1.8', '--mu', '0.9999'] + SMALL)
        self.assertEqual(code, EXIT_OK)
        payload = json.loads(out)
        self.assertEqual(list(payload), ['c', 'mu', 'resolution', 'lambda_min', 'argmin', 'verdict'])
        self.assertEqual(payload['verdict'], 'NumericallyConvex')
        self.assertGreater(payload['lambda_min'], 0.0)

    def test_certify_witness(self):
        """At mu = 0, c = 1.601 the certificate finds a witness and exits with 1."""
        code, out = run(['certify', '--c', '1.601', '--mu', '0'])
        self.assertEqual(code, EXIT_WITNESS)
        self.assertEqual(json.loads(out)['verdict'], 'WitnessNonConvex')

    def test_certify_degenerate(self):
        """A component joined to the sun collision is Degenerate, exit 3."""
        code, out = run(['certify', '--c', '1.8', '--mu', '0.5'] + SMALL)
        self.assertEqual(code, EXIT_DEGENERATE)
        self.assertIsNone(json.loads(out)['lambda_min'])

    def test_certify_invalid(self):
        """mu = 1 and bad resolutions are usage errors."""
        self.assertEqual(run(['certify', '--c', '1.8', '--mu', '1'])[0], EXIT_INVALID)
        self.assertEqual(run(['certify', '--c', '1.8', '--mu', '0.5',
                              '--resolution', '0', '4', '4', '4'])[0], EXIT_INVALID)

    def test_scan_is_deterministic(self):
        """A 10x10 scan prints identical bytes with one job and with eight."""
        argv = ['scan', '--c-min', '1.6', '--c-max', '2.5', '--nc', '10',
                '--mu-min', '0.9', '--mu-max', '0.9999', '--nmu', '10'] + SMALL
        with mock.patch.dict(os.environ):
            os.environ.pop('CONVEXITY_ATLAS_JOBS', None)
            code, first = run(argv + ['--jobs', '1'])
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(run(argv + ['--jobs', '8'])[1], first)
        df = pd.read_csv(io.StringIO(first))
        self.assertEqual(len(df), 100)
        self.assertEqual(list(df.columns), ['c', 'mu', 'lambda_min', 'verdict'])

    def test_scan_to_file(self):
        """--output writes the table and its metadata sidecar."""
        path = os.path.join(self.temp_dir, 'grid.csv')
        code, out = run(['scan', '--c-min', '1.8', '--c-max', '1.8', '--nc', '1',
                         '--mu-min', '0.9999', '--mu-max', '0.9999', '--nmu', '1',
                         '--output', path] + SMALL)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, '')
        self.assertTrue(os.path.exists(path))
        with open(os.path.join(self.temp_dir, 'grid_metadata.json'), encoding='utf-8') as f:
            self.assertEqual(json.load(f)['config']['command'], 'scan')

    def test_scan_rejects_reversed_range(self):
        """A reversed range is a usage error."""
        code, _ = run(['scan', '--c-min', '2.0', '--c-max', '1.8', '--nc', '2',
                       '--mu-min', '0.9', '--mu-max', '0.99', '--nmu', '2'] + SMALL)
        self.assertEqual(code, EXIT_INVALID)

    def test_slice_with_svg(self):
        """The slice prints both curves and rerunning reproduces the SVG bytes."""
        svg = os.path.join(self.temp_dir, 'slice.svg')
        code, out = run(['slice', '--c', '1.601', '--grid', '161', '161', '--svg', svg])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(set(pd.read_csv(io.StringIO(out))['curve_id']), {'K=0', 'detD2K=0'})
        with open(svg, 'rb') as f:
            first = f.read()
        self.assertEqual(run(['slice', '--c', '1.601', '--grid', '161', '161', '--svg', svg])[0], EXIT_OK)
        with open(svg, 'rb') as f:
            self.assertEqual(f.read(), first)

    def test_slice_empty(self):
        """A box missing both curves exits with 3."""
        code, _ = run(['slice', '--c', '1.601', '--bbox', '0.1', '0.2', '5', '6', '--grid', '11', '11'])
        self.assertEqual(code, EXIT_DEGENERATE)

    def test_flow(self):
        """A short run prints the trajectory table."""
        code, out = run(['flow', '--c', '1.8', '--mu', '0.9',
                         '--z0', '0', '0', '0', '0.31622776601683794', '--t-end', '5'])
        self.assertEqual(code, EXIT_OK)
        df = pd.read_csv(io.StringIO(out))
        self.assertEqual(list(df.columns), ['t', 'v1', 'v2', 'u1', 'u2', 'K'])
        self.assertEqual(df['t'].iloc[-1], 5.0)
        self.assertLess(df['K'].abs().max(), 1e-8)

    def test_flow_errors(self):
        """Off-surface data exits with 2, a drift failure with 4."""
        self.assertEqual(run(['flow', '--c', '1.8', '--mu', '0.9', '--z0', '0', '0', '0', '0',
                              '--t-end', '1'])[0], EXIT_INVALID)
        self.assertEqual(run(['flow', '--c', '1.8', '--mu', '0.9', '--drift-bound', '1e-300',
                              '--z0', '0', '0', '0', '0.31622776601683794', '--t-end', '5'])[0],
                         EXIT_INTEGRATION)

    def test_xlsx_needs_output(self):
        """Binary formats cannot go to stdout."""
        self.assertEqual(run(['lagrange', '--mu', '0.5', '--format', 'xlsx'])[0], EXIT_INVALID)

    def test_orbit(self):
        """The default bracket finds the circular orbit at mu = 0."""
        code, out = run(['orbit', '--c', '1.8', '--mu', '0'])
        self.assertEqual(code, EXIT_OK)
        payload = json.loads(out)
        self.assertLess(payload['closure_error'], 1e-6)
        self.assertGreater(payload['period'], 0.0)

    def test_orbit_bad_bracket(self):
        """A bracket outside the component is an orbit failure."""
        code, _ = run(['orbit', '--c', '1.8', '--mu', '0', '--bracket', '-0.9', '-0.8'])
        self.assertEqual(code, EXIT_INTEGRATION)

    def test_usage_errors(self):
        """argparse errors exit with 2."""
        self.assertEqual(run(['certify', '--c', '1.8'])[0], EXIT_INVALID)
        self.assertEqual(run(['orbit', '--c', '1.8', '--mu', '0', '--branch', '3'])[0], EXIT_INVALID)
        self.assertEqual(run(['unknown'])[0], EXIT_INVALID)


if __name__ == '__main__':
    unittest.main()
