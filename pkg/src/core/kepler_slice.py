"""
The mu = 0 determinant of D^2K and its slice through {v2 = 0, u1 = 0}.

On the slice, K and det D^2K reduce to functions of (v1, u2). Their zero
curves are traced by marching squares; where the two curves cross, the
level set {K = 0} has a degenerate Hessian, and on the far side of such a
crossing convexity fails.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from config import settings
from src.core.dynamics import Params, RegPoint
from src.core.errors import InvalidParamsError
from src.utils.validators import validate_range

logger = logging.getLogger(__name__)

K_CURVE = 'K=0'
DET_CURVE = 'detD2K=0'

# det_hessian_kepler = KEPLER_DET_SCALE * det(hessian_K) at mu = 0
KEPLER_DET_SCALE = 16.0


def det_hessian_kepler(c: float, z: RegPoint) -> float:
    """
    Closed-form det D^2K at mu = 0, as produced by computer algebra.

    The polynomial is kept exactly as derived; it equals 16 times the
    determinant of the Hessian returned by RegularizedSystem.hessian_K.
    """
    v1, v2, u1, u2 = z.v1, z.v2, z.u1, z.u2
    return (2304 * v1 ** 8 + 9216 * v1 ** 6 * v2 ** 2 - 3072 * u2 * v1 ** 5
            + 13824 * v1 ** 4 * v2 ** 4 - 1280 * c * v1 ** 4 + 3072 * u1 * v1 ** 4 * v2
            - 6144 * u2 * v1 ** 3 * v2 ** 2 + 6144 * u1 * v1 ** 2 * v2 ** 3
            - 2560 * c * v1 ** 2 * v2 ** 2 - 256 * u1 ** 2 * v1 ** 2 + 9216 * v1 ** 2 * v2 ** 6
            + 768 * u2 ** 2 * v1 ** 2 - 3072 * u2 * v1 * v2 ** 4 + 512 * c * u2 * v1
            - 2048 * u1 * u2 * v1 * v2 + 64 * c ** 2
            + 2304 * v2 ** 8 + 768 * u1 ** 2 * v2 ** 2 - 512 * c * u1 * v2
            + 3072 * u1 * v2 ** 5 - 1280 * c * v2 ** 4 - 256 * u2 ** 2 * v2 ** 2)


def restricted_hamiltonian(c: float, v1, u2):
    """K on {v2 = 0, u1 = 0} at mu = 0."""
    return 0.5 * u2 * u2 + 2.0 * v1 ** 3 * u2 + c * v1 * v1 - 0.5


def restricted_det(c: float, v1, u2):
    """det_hessian_kepler on {v2 = 0, u1 = 0}."""
    return (2304 * v1 ** 8 - 3072 * u2 * v1 ** 5 - 1280 * c * v1 ** 4
            + 768 * u2 ** 2 * v1 ** 2 + 512 * c * u2 * v1 + 64 * c ** 2)


Segment = Tuple[Tuple[float, float], Tuple[float, float]]


@dataclass
class SliceCurve:
    """
    Zero set of one slice function as polylines in the (v1, u2) plane.

    Attributes:
        curve_id: K_CURVE or DET_CURVE
        polylines: Arrays of shape (m, 2) holding (v1, u2) vertices
    """
    curve_id: str
    polylines: List[np.ndarray]
    cell_segments: Dict[Tuple[int, int], List[Segment]] = field(default_factory=dict, repr=False)

    @property
    def is_empty(self) -> bool:
        return not self.polylines

    @property
    def points(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 2))
        return np.concatenate(self.polylines)

    def to_frame(self) -> pd.DataFrame:
        points = self.points
        return pd.DataFrame({'curve_id': [self.curve_id] * len(points),
                             'v1': points[:, 0], 'u2': points[:, 1]})


class ContourTracer:
    """
    Marching squares on a rectangular grid with edge vertices refined by
    brentq on the exact function.

    Saddle cells are resolved by the value at the cell centre. Segments
    sharing an edge are chained into polylines; chains that end on the grid
    border stay open, the others close on themselves.
    """

    def __init__(self, bbox=settings.SLICE_DEFAULT_BBOX, grid=settings.SLICE_DEFAULT_GRID):
        """
        Initialize the grid.

        Args:
            bbox: (v1_min, v1_max, u2_min, u2_max)
            grid: Number of grid points along v1 and u2
        """
        v1_min, v1_max, u2_min, u2_max = bbox
        n_v1, n_u2 = grid
        if n_v1 < 2 or n_u2 < 2:
            raise InvalidParamsError(f"slice grid {grid!r} needs at least 2 points per axis")
        self.x = np.linspace(*validate_range('v1', v1_min, v1_max, n_v1)[:2], int(n_v1))
        self.y = np.linspace(*validate_range('u2', u2_min, u2_max, n_u2)[:2], int(n_u2))

    def _edge_point(self, function: Callable, edge) -> Tuple[float, float]:
        kind, i, j = edge
        if kind == 'h':
            y = self.y[j]
            g = lambda s: function(s, y)
            a, b = self.x[i], self.x[i + 1]
        else:
            x = self.x[i]
            g = lambda s: function(x, s)
            a, b = self.y[j], self.y[j + 1]
        ga, gb = g(a), g(b)
        if ga * gb >= 0.0:
            # a grid value at rounding level decided the sign
            root = a if abs(ga) <= abs(gb) else b
        else:
            root = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if abs(g(root)) >= settings.SLICE_RESIDUAL_TOL:
            logger.warning("slice vertex on edge %s has residual %.3g", edge, abs(g(root)))
        return (float(root), float(y)) if kind == 'h' else (float(x), float(root))

    def trace(self, function: Callable, curve_id: str) -> SliceCurve:
        """
        Trace {function = 0} inside the grid.

        Args:
            function: Vectorized f(v1, u2)
            curve_id: Label of the resulting curve

        Returns:
            SliceCurve: possibly empty
        """
        values = function(self.x[:, None], self.y[None, :])
        positive = values > 0.0
        corners = (positive[:-1, :-1].astype(int) + positive[1:, :-1] + positive[1:, 1:]
                   + positive[:-1, 1:])
        cells = np.argwhere((corners > 0) & (corners < 4))

        vertices: Dict[tuple, Tuple[float, float]] = {}
        segments_by_cell: Dict[Tuple[int, int], List[tuple]] = {}
        for i, j in cells:
            i, j = int(i), int(j)
            bottom, top = ('h', i, j), ('h', i, j + 1)
            left, right = ('v', i, j), ('v', i + 1, j)
            signs = [positive[i, j], positive[i + 1, j], positive[i + 1, j + 1], positive[i, j + 1]]
            # corner k sits between these two edges
            adjacent = [(left, bottom), (bottom, right), (right, top), (top, left)]
            if sum(signs) == 2 and signs[0] == signs[2]:
                centre = function(0.5 * (self.x[i] + self.x[i + 1]),
                                  0.5 * (self.y[j] + self.y[j + 1])) > 0.0
                pairs = [adjacent[k] for k in range(4) if signs[k] != centre]
            else:
                crossed = [edge for edge, (p, q) in
                           zip((bottom, right, top, left), ((0, 1), (1, 2), (2, 3), (3, 0)))
                           if signs[p] != signs[q]]
                pairs = [tuple(crossed)]
            for pair in pairs:
                for edge in pair:
                    if edge not in vertices:
                        vertices[edge] = self._edge_point(function, edge)
                segments_by_cell.setdefault((i, j), []).append(pair)

        polylines = self._chain([pair for cell in sorted(segments_by_cell)
                                 for pair in segments_by_cell[cell]], vertices)
        cell_segments = {cell: [(vertices[a], vertices[b]) for a, b in pairs]
                         for cell, pairs in segments_by_cell.items()}
        logger.debug("%s: %d polylines from %d cells", curve_id, len(polylines), len(cells))
        return SliceCurve(curve_id, polylines, cell_segments)

    @staticmethod
    def _chain(pairs: List[tuple], vertices: Dict) -> List[np.ndarray]:
        neighbours: Dict[tuple, List[tuple]] = {}
        for a, b in pairs:
            neighbours.setdefault(a, []).append(b)
            neighbours.setdefault(b, []).append(a)

        used = set()
        polylines = []
        # open chains start at edges used by a single segment
        starts = sorted(edge for edge, links in neighbours.items() if len(links) == 1)
        starts += sorted(edge for edge, links in neighbours.items() if len(links) != 1)
        for start in starts:
            if not any(frozenset((start, nxt)) not in used for nxt in neighbours[start]):
                continue
            chain = [start]
            current = start
            while True:
                step = next((nxt for nxt in neighbours[current]
                             if frozenset((current, nxt)) not in used), None)
                if step is None:
                    break
                used.add(frozenset((current, step)))
                chain.append(step)
                current = step
            polylines.append(np.array([vertices[edge] for edge in chain]))
        return polylines


def _segment_intersection(p: Segment, q: Segment):
    (x1, y1), (x2, y2) = p
    (x3, y3), (x4, y4) = q
    denominator = (x2 - x1) * (y4 - y3) - (y2 - y1) * (x4 - x3)
    if denominator == 0.0:
        return None
    s = ((x3 - x1) * (y4 - y3) - (y3 - y1) * (x4 - x3)) / denominator
    t = ((x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)) / denominator
    if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
        return x1 + s * (x2 - x1), y1 + s * (y2 - y1)
    return None


def curve_intersections(first: SliceCurve, second: SliceCurve) -> List[Tuple[float, float]]:
    """
    Crossing points of two curves traced on the same grid.

    Every segment stays inside the cell it was traced in, so only segments
    of a common cell can meet.

    Returns:
        List[Tuple[float, float]]: (v1, u2) points, ordered by cell
    """
    hits = []
    for cell in sorted(set(first.cell_segments) & set(second.cell_segments)):
        for p in first.cell_segments[cell]:
            for q in second.cell_segments[cell]:
                point = _segment_intersection(p, q)
                if point is not None:
                    hits.append(point)
    return hits


def slice_curves(c: float, bbox=settings.SLICE_DEFAULT_BBOX,
                 resolution=settings.SLICE_DEFAULT_GRID) -> Tuple[SliceCurve, SliceCurve]:
    """
    Zero curves of K and of det D^2K on {v2 = 0, u1 = 0} at mu = 0.

    Args:
        c: Energy parameter (> 3/2)
        bbox: (v1_min, v1_max, u2_min, u2_max)
        resolution: Grid points along v1 and u2

    Returns:
        Tuple[SliceCurve, SliceCurve]: the K curve and the determinant curve
    """
    Params(0.0, c).require_compact()
    tracer = ContourTracer(bbox, resolution)
    k_curve = tracer.trace(lambda v1, u2: restricted_hamiltonian(c, v1, u2), K_CURVE)
    det_curve = tracer.trace(lambda v1, u2: restricted_det(c, v1, u2), DET_CURVE)
    return k_curve, det_curve


def slice_frame(curves) -> pd.DataFrame:
    """Both curves as one table with columns curve_id, v1, u2."""
    frames = [curve.to_frame() for curve in curves]
    return pd.concat(frames, ignore_index=True)
