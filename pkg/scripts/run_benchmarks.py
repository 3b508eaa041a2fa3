"""
Timing harness for certificates and scans.

    python scripts/run_benchmarks.py --jobs 4
"""
import argparse
import logging
import os
import sys
import time

import pandas as pd

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import settings
from src.core.convexity import ConvexityCertifier
from src.core.dynamics import Params
from src.core.result_storage import render_csv
from src.utils.helpers import configure_logging, resolve_jobs

logger = logging.getLogger('benchmarks')


def time_call(function, *args, repeat=3):
    best = float('inf')
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = function(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description='Time certify and scan.')
    parser.add_argument('--jobs', type=int, default=1)
    parser.add_argument('--grid', type=int, default=4, help='scan grid is GRID x GRID')
    args = parser.parse_args(argv)
    configure_logging()

    certifier = ConvexityCertifier(settings.DEFAULT_RESOLUTION, resolve_jobs(args.jobs))
    rows = []
    for mu, c in ((0.0, 1.601), (0.9999, 1.8), (0.5, 2.5)):
        seconds, certificate = time_call(certifier.certify, Params(mu, c))
        rows.append({'task': 'certify', 'mu': mu, 'c': c, 'seconds': seconds,
                     'verdict': certificate.verdict.value})

    c_values = [1.6 + 0.9 * k / max(args.grid - 1, 1) for k in range(args.grid)]
    mu_values = [0.5 + 0.4999 * k / max(args.grid - 1, 1) for k in range(args.grid)]
    seconds, grid = time_call(certifier.scan, c_values, mu_values, repeat=1)
    rows.append({'task': f'scan {args.grid}x{args.grid}', 'mu': None, 'c': None,
                 'seconds': seconds, 'verdict': f'{len(grid.cells)} cells'})

    sys.stdout.write(render_csv(pd.DataFrame(rows)))
    return 0


if __name__ == '__main__':
    sys.exit(main())
