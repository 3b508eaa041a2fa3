import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.stats import qmc

from config import settings
from src.core.dynamics import Params, RegPoint, RegularizedSystem
from src.core.eigen import jacobi_eigh
from src.core.errors import AtlasError, InvalidParamsError
from src.core.hill_region import (HillComponent, fiber_shift, in_earth_component,
                                  sample_filled_domain, sample_surface, surface_point)
from src.utils.helpers import parallel_map
from src.utils.validators import validate_resolution

logger = logging.getLogger(__name__)

_CHUNK = 65536


class Verdict(str, Enum):
    NUMERICALLY_CONVEX = 'NumericallyConvex'
    WITNESS_NON_CONVEX = 'WitnessNonConvex'
    DEGENERATE = 'Degenerate'
    INVALID_PARAMS = 'InvalidParams'
    ERROR = 'Error'


@dataclass(frozen=True)
class SurfaceSample:
    """A point of Sigma with the smallest Hessian eigenvalue there."""
    z: RegPoint
    lambda_min: float


@dataclass(frozen=True)
class ConvexityCertificate:
    """
    Outcome of sampling D^2K over the filled domain.

    lambda_min and argmin are None when the domain is empty (collapsed, or
    not separated from the sun collision).
    """
    params: Params
    resolution: Tuple[int, int, int, int]
    lambda_min: Optional[float]
    argmin: Optional[RegPoint]
    verdict: Verdict

    def to_dict(self) -> Dict:
        nr, ntheta, nw, nt = self.resolution
        return {
            'c': self.params.c,
            'mu': self.params.mu,
            'resolution': {'nr': nr, 'ntheta': ntheta, 'nw': nw, 'nt': nt},
            'lambda_min': self.lambda_min,
            'argmin': None if self.argmin is None else [float(x) for x in self.argmin.as_array()],
            'verdict': self.verdict.value,
        }


@dataclass(frozen=True)
class ScanCell:
    c: float
    mu: float
    verdict: Verdict
    lambda_min: Optional[float]


@dataclass
class ScanGrid:
    """
    Verdicts over a (c, mu) grid, cells sorted by (c, mu).

    mu0_hat maps c to the smallest tested mu above which every tested cell is
    NumericallyConvex. It is a heuristic: monotonicity in mu is not known.
    """
    c_values: List[float]
    mu_values: List[float]
    resolution: Tuple[int, int, int, int]
    cells: List[ScanCell]
    mu0_hat: Dict[float, Optional[float]] = field(default_factory=dict)

    def cell(self, c: float, mu: float) -> ScanCell:
        for entry in self.cells:
            if entry.c == c and entry.mu == mu:
                return entry
        raise KeyError((c, mu))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            'c': [cell.c for cell in self.cells],
            'mu': [cell.mu for cell in self.cells],
            'lambda_min': [np.nan if cell.lambda_min is None else cell.lambda_min
                           for cell in self.cells],
            'verdict': [cell.verdict.value for cell in self.cells],
        })
        return frame.sort_values(['c', 'mu'], kind='mergesort').reset_index(drop=True)


def _min_eigen(system: RegularizedSystem, points: np.ndarray,
               with_vectors: bool = False):
    values, vectors = [], []
    for start in range(0, len(points), _CHUNK):
        eigvals, eigvecs = jacobi_eigh(system.hessian_batch(points[start:start + _CHUNK]))
        values.append(eigvals[:, 0])
        if with_vectors:
            vectors.append(eigvecs[:, :, 0])
    values = np.concatenate(values) if values else np.empty(0)
    if with_vectors:
        return values, (np.concatenate(vectors) if vectors else np.empty((0, 4)))
    return values


def classify(lambda_min: Optional[float]) -> Verdict:
    if lambda_min is None or not math.isfinite(lambda_min):
        return Verdict.DEGENERATE
    if abs(lambda_min) <= settings.DEGENERATE_BAND:
        return Verdict.DEGENERATE
    return Verdict.NUMERICALLY_CONVEX if lambda_min > 0.0 else Verdict.WITNESS_NON_CONVEX


def _scan_cell(task) -> ScanCell:
    c, mu, resolution = task
    try:
        certificate = ConvexityCertifier(resolution).certify(Params(mu, c))
    except InvalidParamsError as exc:
        logger.warning("cell c=%r mu=%r rejected: %s", c, mu, exc)
        return ScanCell(c, mu, Verdict.INVALID_PARAMS, None)
    except AtlasError as exc:
        logger.warning("cell c=%r mu=%r failed: %s", c, mu, exc)
        return ScanCell(c, mu, Verdict.ERROR, None)
    return ScanCell(c, mu, certificate.verdict, certificate.lambda_min)


class ConvexityCertifier:
    """
    Numerical convexity certificates for the earth component Sigma_{mu,c}.

    A certificate is the minimum of the smallest eigenvalue of D^2K over the
    samples of the filled domain W. It is a sampled statement, not a proof:
    the resolution is recorded so that any certificate can be reproduced
    bit for bit.
    """

    def __init__(self, resolution=settings.DEFAULT_RESOLUTION, jobs: int = 1):
        """
        Initialize the certifier.

        Args:
            resolution: (n_r, n_theta, n_w, n_t) sample counts
            jobs: Worker processes used by scan
        """
        self.resolution = validate_resolution(resolution)
        self.jobs = max(1, int(jobs))

    def certify(self, params: Params) -> ConvexityCertificate:
        """
        Certify strong convexity of Sigma_{mu,c} at this resolution.

        Args:
            params: Mass ratio and energy parameter

        Returns:
            ConvexityCertificate: NumericallyConvex if every sample has a
            positive smallest eigenvalue, WitnessNonConvex (with the sample
            of smallest eigenvalue) if one is negative, Degenerate if the
            domain is empty or the minimum lies within DEGENERATE_BAND of 0

        Raises:
            InvalidParamsError: for mu = 1 or c <= 3/2
        """
        params.require_compact()
        system = RegularizedSystem(params)
        component = HillComponent(params, self.resolution[1])
        batches = list(sample_filled_domain(params, self.resolution, component))
        if not batches:
            logger.info("certificate mu=%r c=%r: Degenerate (empty domain)", params.mu, params.c)
            return ConvexityCertificate(params, self.resolution, None, None, Verdict.DEGENERATE)

        points = np.concatenate(batches)
        lambdas = _min_eigen(system, points)
        # argmin returns the first occurrence: ties go to the lowest sample index
        index = int(np.argmin(lambdas))
        lambda_min = float(lambdas[index])
        verdict = classify(lambda_min)
        certificate = ConvexityCertificate(params, self.resolution, lambda_min,
                                           RegPoint.from_array(points[index]), verdict)
        logger.info("certificate mu=%r c=%r: %s, lambda_min=%.6g over %d samples",
                    params.mu, params.c, verdict.value, lambda_min, len(points))
        return certificate

    def scan(self, c_values: Sequence[float], mu_values: Sequence[float],
             with_mu0_hat: bool = True) -> ScanGrid:
        """
        Certify every cell of a (c, mu) grid.

        Cells are independent and are evaluated by a worker pool; results are
        assembled in (c, mu) order, so the grid does not depend on jobs.
        A failing cell is recorded in its verdict and never aborts the scan.

        Args:
            c_values: Energy parameters
            mu_values: Mass ratios
            with_mu0_hat: Also report the heuristic mu0_hat(c)

        Returns:
            ScanGrid: One cell per (c, mu)
        """
        c_values = sorted(float(c) for c in c_values)
        mu_values = sorted(float(mu) for mu in mu_values)
        tasks = [(c, mu, self.resolution) for c in c_values for mu in mu_values]
        logger.info("scanning %d cells with %d job(s)", len(tasks), self.jobs)
        cells = parallel_map(_scan_cell, tasks, self.jobs)
        grid = ScanGrid(c_values, mu_values, self.resolution, cells)
        if with_mu0_hat:
            grid.mu0_hat = {c: self._trailing_convex_mu(grid, c) for c in c_values}
        return grid

    @staticmethod
    def _trailing_convex_mu(grid: ScanGrid, c: float) -> Optional[float]:
        row = sorted((cell for cell in grid.cells if cell.c == c), key=lambda cell: cell.mu)
        estimate = None
        for cell in reversed(row):
            if cell.verdict is not Verdict.NUMERICALLY_CONVEX:
                break
            estimate = cell.mu
        return estimate

    def estimate_mu0(self, c: float, mu_low: float, mu_high: float,
                     iterations: int = 12) -> Optional[float]:
        """
        Bisect on the verdict for the convexity threshold mu0(c).

        Heuristic: assumes the verdict is monotone in mu on [mu_low, mu_high],
        which is not established.

        Returns:
            Optional[float]: Upper end of the final bracket, or None when
            mu_high itself is not NumericallyConvex
        """
        logger.warning("estimate_mu0 assumes monotonicity in mu; treat the result as a heuristic")
        convex = lambda mu: self.certify(Params(mu, c)).verdict is Verdict.NUMERICALLY_CONVEX
        if not convex(mu_high):
            return None
        if convex(mu_low):
            return mu_low
        for _ in range(iterations):
            middle = 0.5 * (mu_low + mu_high)
            if convex(middle):
                mu_high = middle
            else:
                mu_low = middle
        return mu_high

    def surface_samples(self, params: Params, count: Optional[int] = None) -> List[SurfaceSample]:
        """
        Samples of Sigma ordered by increasing smallest eigenvalue.

        Args:
            params: Mass ratio and energy parameter
            count: Keep only the first count samples

        Returns:
            List[SurfaceSample]: lowest lambda_min first (stable in sample index)
        """
        points = sample_surface(params, self.resolution)
        if len(points) == 0:
            return []
        lambdas = _min_eigen(RegularizedSystem(params), points)
        order = np.argsort(lambdas, kind='stable')
        if count is not None:
            order = order[:count]
        return [SurfaceSample(RegPoint.from_array(points[k]), float(lambdas[k])) for k in order]

    def nonconvexity_witness(self, params: Params) -> Optional[RegPoint]:
        """
        Search Sigma for a point where D^2K has a negative eigenvalue.

        The lowest surface samples seed a Nelder-Mead descent of lambda_min
        over the surface chart (v1, v2, phi) -> -w(v) + r(v) e^{i phi};
        extra restarts around the best seed come from an unscrambled Halton
        sequence, so the search is deterministic. Chart points whose v leaves
        the earth component along its ray are rejected.

        Returns:
            Optional[RegPoint]: A point with lambda_min < 0 and |K| below
            SURFACE_RESIDUAL_TOL, or None if none was found
        """
        params.require_compact()
        system = RegularizedSystem(params)
        seeds = self.surface_samples(params, settings.WITNESS_SEEDS)
        if not seeds:
            return None

        def objective(x):
            v = complex(x[0], x[1])
            if not in_earth_component(params, v):
                return 1e3
            point = surface_point(params, v, x[2])
            if point is None:
                return 1e3
            try:
                values, _ = jacobi_eigh(system.hessian_batch(point.as_array()))
            except AtlasError:
                return 1e3
            return float(values[0])

        starts = [self._chart(params, sample.z) for sample in seeds]
        scale = max(abs(seeds[0].z.v), 1e-3)
        offsets = qmc.Halton(d=3, scramble=False).random(4)[1:] - 0.5
        starts += [starts[0] + offset * np.array([0.1 * scale, 0.1 * scale, 0.5])
                   for offset in offsets]

        best_value, best_x = seeds[0].lambda_min, starts[0]
        for start in starts:
            result = minimize(objective, start, method='Nelder-Mead',
                              options={'maxiter': settings.WITNESS_MAXITER,
                                       'xatol': 1e-10, 'fatol': 1e-12})
            if result.fun < best_value:
                best_value, best_x = float(result.fun), result.x

        if best_value >= 0.0:
            logger.info("no non-convexity witness for mu=%r c=%r (min lambda %.6g)",
                        params.mu, params.c, best_value)
            return None
        witness = surface_point(params, complex(best_x[0], best_x[1]), best_x[2])
        residual = abs(system.regularized_hamiltonian(witness))
        if residual >= settings.SURFACE_RESIDUAL_TOL:
            logger.warning("witness residual %.3g too large; discarding", residual)
            return None
        logger.info("non-convexity witness for mu=%r c=%r: lambda_min=%.6g at %s",
                    params.mu, params.c, best_value, witness)
        return witness

    @staticmethod
    def _chart(params: Params, z: RegPoint) -> np.ndarray:
        offset = z.u + complex(fiber_shift(params, z.v))
        return np.array([z.v1, z.v2, math.atan2(offset.imag, offset.real)])


def certify(params: Params, resolution=settings.DEFAULT_RESOLUTION) -> ConvexityCertificate:
    return ConvexityCertifier(resolution).certify(params)


def scan(c_values, mu_values, resolution=settings.DEFAULT_RESOLUTION, jobs: int = 1) -> ScanGrid:
    return ConvexityCertifier(resolution, jobs).scan(c_values, mu_values)


def nonconvexity_witness(params: Params, resolution=settings.DEFAULT_RESOLUTION) -> Optional[RegPoint]:
    return ConvexityCertifier(resolution).nonconvexity_witness(params)
