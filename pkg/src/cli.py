"""
Command line front end.

    convexity-atlas lagrange --mu 0.01
    convexity-atlas certify --c 1.601 --mu 0
    convexity-atlas scan --c-min 1.6 --c-max 2.5 --nc 20 --mu-min 0.5 --mu-max 0.9999 --nmu 20
    convexity-atlas slice --c 1.601 --svg figure.svg
    convexity-atlas flow --c 1.8 --mu 0.9 --z0 0 0 0 0.31622776601683794 --t-end 100
    convexity-atlas orbit --c 1.8 --mu 0

Results go to stdout (or --output); diagnostics go to stderr. Exit codes:
0 success or convex, 1 non-convexity witness, 2 invalid input, 3 degenerate
or empty result, 4 integration failure.
"""
import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from config import settings
from src.core.convexity import ConvexityCertifier, Verdict
from src.core.dynamics import Params, RegPoint, RegularizedSystem
from src.core.errors import (AtlasError, IntegrationError, InvalidParamsError,
                             OrbitSearchError)
from src.core.flow import FlowIntegrator, IntegrationSettings
from src.core.kepler_slice import curve_intersections, slice_curves, slice_frame
from src.core.orbits import SymmetricOrbitSearch, default_orbit_bracket
from src.core.result_storage import (ResultStorage, render_csv, render_json,
                                     render_slice_figure)
from src.utils.helpers import configure_logging, resolve_jobs
from src.utils.validators import validate_range, validate_resolution, validate_tolerance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_WITNESS = 1
EXIT_INVALID = 2
EXIT_DEGENERATE = 3
EXIT_INTEGRATION = 4

_VERDICT_EXIT = {
    Verdict.NUMERICALLY_CONVEX: EXIT_OK,
    Verdict.WITNESS_NON_CONVEX: EXIT_WITNESS,
    Verdict.DEGENERATE: EXIT_DEGENERATE,
}


@dataclass
class RunConfig:
    """Validated options of one command."""
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    resolution: Optional[tuple] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: Optional[str] = None
    fmt: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        return {'command': self.command, 'params': self.params,
                'resolution': list(self.resolution) if self.resolution else None,
                'tolerances': self.tolerances}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='convexity-atlas',
        description='Convexity certificates, flows and periodic orbits of the '
                    'Levi-Civita regularized restricted three-body problem.')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='log INFO (-v) or DEBUG (-vv) to stderr')
    commands = parser.add_subparsers(dest='command', required=True)

    def output_options(sub, formats):
        sub.add_argument('--output', help='write the result to this path instead of stdout')
        sub.add_argument('--format', choices=formats, help='output format (default from --output)')

    lagrange = commands.add_parser('lagrange', help='the five Lagrange points, sorted by value')
    lagrange.add_argument('--mu', type=float, required=True)
    output_options(lagrange, ['csv', 'xlsx'])

    certify = commands.add_parser('certify', help='numerical convexity certificate')
    certify.add_argument('--c', type=float, required=True)
    certify.add_argument('--mu', type=float, required=True)
    certify.add_argument('--resolution', type=int, nargs=4, metavar=('NR', 'NTHETA', 'NW', 'NT'),
                         default=list(settings.DEFAULT_RESOLUTION))
    certify.add_argument('--witness', action='store_true',
                         help='also search the surface for a non-convexity witness')
    output_options(certify, ['json'])

    scan = commands.add_parser('scan', help='certificates over a (c, mu) grid')
    for name, count in (('c', 'nc'), ('mu', 'nmu')):
        scan.add_argument(f'--{name}-min', type=float, required=True)
        scan.add_argument(f'--{name}-max', type=float, required=True)
        scan.add_argument(f'--{count}', type=int, required=True)
    scan.add_argument('--resolution', type=int, nargs=4, metavar=('NR', 'NTHETA', 'NW', 'NT'),
                      default=list(settings.DEFAULT_RESOLUTION))
    scan.add_argument('--jobs', type=int, default=1,
                      help=f'worker processes; {settings.JOBS_ENV_VAR} overrides')
    scan.add_argument('--mu0-hat', action='store_true',
                      help='log the heuristic convexity threshold per c')
    output_options(scan, ['csv', 'xlsx'])

    slice_ = commands.add_parser('slice', help='K = 0 and det D^2K = 0 on v2 = u1 = 0 (mu = 0)')
    slice_.add_argument('--c', type=float, required=True)
    slice_.add_argument('--bbox', type=float, nargs=4,
                        metavar=('V1_MIN', 'V1_MAX', 'U2_MIN', 'U2_MAX'),
                        default=list(settings.SLICE_DEFAULT_BBOX))
    slice_.add_argument('--grid', type=int, nargs=2, metavar=('NV1', 'NU2'),
                        default=list(settings.SLICE_DEFAULT_GRID))
    slice_.add_argument('--svg', help='also render both curves to this SVG file')
    output_options(slice_, ['csv', 'xlsx'])

    for name, helptext in (('flow', 'integrate the regularized flow'),
                           ('orbit', 'symmetric periodic orbit by shooting')):
        sub = commands.add_parser(name, help=helptext)
        sub.add_argument('--c', type=float, required=True)
        sub.add_argument('--mu', type=float, required=True)
        sub.add_argument('--rtol', type=float)
        sub.add_argument('--atol', type=float)
        sub.add_argument('--drift-bound', type=float, default=settings.DEFAULT_DRIFT_BOUND)
        if name == 'flow':
            sub.add_argument('--z0', type=float, nargs=4, required=True,
                             metavar=('V1', 'V2', 'U1', 'U2'))
            sub.add_argument('--t-end', type=float, required=True)
            output_options(sub, ['csv', 'xlsx'])
        else:
            sub.add_argument('--bracket', type=float, nargs=2, metavar=('V1_LOW', 'V1_HIGH'))
            sub.add_argument('--branch', type=int, choices=[1, -1], default=1)
            output_options(sub, ['json'])
    return parser


def _tolerances(args, rtol_default, atol_default) -> Dict[str, float]:
    return {
        'rtol': validate_tolerance('rtol', args.rtol if args.rtol is not None else rtol_default),
        'atol': validate_tolerance('atol', args.atol if args.atol is not None else atol_default),
        'drift_bound': validate_tolerance('drift_bound', args.drift_bound),
    }


def make_config(args) -> RunConfig:
    """
    Validate parsed arguments before any computation.

    Raises:
        InvalidParamsError: for any inadmissible option
    """
    config = RunConfig(args.command, output=getattr(args, 'output', None),
                       fmt=getattr(args, 'format', None))
    if args.command in ('lagrange', 'certify', 'flow', 'orbit'):
        config.params = {'mu': args.mu}
    if args.command in ('certify', 'slice', 'flow', 'orbit'):
        config.params['c'] = args.c
    if config.params:
        Params(config.params.get('mu', 0.0), config.params.get('c', 2.0))
    if args.command in ('certify', 'scan'):
        config.resolution = validate_resolution(args.resolution)
    if args.command == 'scan':
        c_min, c_max, nc = validate_range('c', args.c_min, args.c_max, args.nc)
        mu_min, mu_max, nmu = validate_range('mu', args.mu_min, args.mu_max, args.nmu)
        config.params = {'c_min': c_min, 'c_max': c_max, 'nc': nc,
                         'mu_min': mu_min, 'mu_max': mu_max, 'nmu': nmu}
    if args.command == 'slice':
        config.params.update({'bbox': list(args.bbox), 'grid': list(args.grid)})
    if args.command == 'flow':
        config.tolerances = _tolerances(args, settings.DEFAULT_RTOL, settings.DEFAULT_ATOL)
        config.params.update({'z0': list(args.z0), 't_end': args.t_end})
    if args.command == 'orbit':
        config.tolerances = _tolerances(args, settings.ORBIT_RTOL, settings.ORBIT_ATOL)
        config.params.update({'bracket': args.bracket, 'branch': args.branch})
    return config


def _emit_table(config: RunConfig, name: str, df: pd.DataFrame):
    fmt = config.fmt or (os.path.splitext(config.output)[1].lstrip('.') if config.output else 'csv')
    if config.output is None:
        if fmt != 'csv':
            raise InvalidParamsError(f"format {fmt!r} needs --output")
        sys.stdout.write(render_csv(df))
        return
    _storage(config.output).store_table(_stem(config.output, name), df, fmt, config.as_dict())


def _emit_json(config: RunConfig, name: str, payload: Dict[str, Any]):
    if config.output is None:
        sys.stdout.write(render_json(payload))
        return
    _storage(config.output).store_json(_stem(config.output, name), payload, config.as_dict())


def _storage(path: str) -> ResultStorage:
    return ResultStorage('file', os.path.dirname(os.path.abspath(path)))


def _stem(path: str, default: str) -> str:
    return os.path.splitext(os.path.basename(path))[0] or default


def cmd_lagrange(config: RunConfig) -> int:
    points = RegularizedSystem(Params(config.params['mu'], 2.0)).lagrange_points()
    df = pd.DataFrame([{'label': p.label, 'q1': p.q1, 'q2': p.q2, 'value': p.value} for p in points])
    _emit_table(config, 'lagrange', df)
    return EXIT_OK


def cmd_certify(config: RunConfig, witness: bool = False) -> int:
    params = Params(config.params['mu'], config.params['c'])
    certifier = ConvexityCertifier(config.resolution)
    certificate = certifier.certify(params)
    payload = certificate.to_dict()
    if witness:
        point = certifier.nonconvexity_witness(params)
        payload['witness'] = None if point is None else [float(x) for x in point.as_array()]
    _emit_json(config, 'certificate', payload)
    return _VERDICT_EXIT[certificate.verdict]


def cmd_scan(config: RunConfig, jobs: int, mu0_hat: bool = False) -> int:
    p = config.params
    c_values = np.linspace(p['c_min'], p['c_max'], p['nc'])
    mu_values = np.linspace(p['mu_min'], p['mu_max'], p['nmu'])
    grid = ConvexityCertifier(config.resolution, resolve_jobs(jobs)).scan(
        c_values, mu_values, with_mu0_hat=mu0_hat)
    if mu0_hat:
        for c, estimate in grid.mu0_hat.items():
            logger.warning("heuristic mu0_hat(c=%r) = %r (assumes monotonicity in mu)", c, estimate)
    _emit_table(config, 'scan', grid.to_frame())
    return EXIT_OK


def cmd_slice(config: RunConfig, svg: Optional[str] = None) -> int:
    c, bbox = config.params['c'], tuple(config.params['bbox'])
    curves = slice_curves(c, bbox, tuple(config.params['grid']))
    hits = curve_intersections(*curves)
    logger.info("slice c=%r: %d intersection(s) of the K and determinant curves", c, len(hits))
    if all(curve.is_empty for curve in curves):
        logger.error("both slice curves are empty inside the bounding box")
        return EXIT_DEGENERATE
    _emit_table(config, 'slice', slice_frame(curves))
    if svg:
        figure = render_slice_figure(curves, hits, bbox, title=f"c = {c!r}, mu = 0")
        _storage(svg).store_figure(_stem(svg, 'slice'), figure, config.as_dict())
    return EXIT_OK


def _integration_settings(config: RunConfig) -> IntegrationSettings:
    return IntegrationSettings(**config.tolerances)


def cmd_flow(config: RunConfig) -> int:
    params = Params(config.params['mu'], config.params['c'])
    z0 = RegPoint(*config.params['z0'])
    trajectory = FlowIntegrator(params, _integration_settings(config)).integrate(
        z0, config.params['t_end'])
    _emit_table(config, 'trajectory', trajectory.to_frame())
    return EXIT_OK


def cmd_orbit(config: RunConfig) -> int:
    params = Params(config.params['mu'], config.params['c'])
    bracket = config.params['bracket'] or default_orbit_bracket(params)
    search = SymmetricOrbitSearch(params, config.params['branch'], _integration_settings(config))
    orbit = search.find(tuple(bracket))
    payload = orbit.to_dict()
    payload['bracket'] = [float(x) for x in bracket]
    _emit_json(config, 'orbit', payload)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        int: Exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging({0: None, 1: 'INFO'}.get(args.verbose, 'DEBUG'))

    try:
        config = make_config(args)
        if args.command == 'lagrange':
            return cmd_lagrange(config)
        if args.command == 'certify':
            return cmd_certify(config, args.witness)
        if args.command == 'scan':
            return cmd_scan(config, args.jobs, args.mu0_hat)
        if args.command == 'slice':
            return cmd_slice(config, args.svg)
        if args.command == 'flow':
            return cmd_flow(config)
        return cmd_orbit(config)
    except InvalidParamsError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INVALID
    except (IntegrationError, OrbitSearchError) as exc:
        logger.error("integration failed: %s", exc)
        return EXIT_INTEGRATION
    except AtlasError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DEGENERATE


if __name__ == '__main__':
    sys.exit(main())
