import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.optimize import bisect

from config import settings
from src.core.errors import InvalidParamsError, RootFindingError, SingularityError
from src.utils.validators import validate_mass_ratio, validate_energy_parameter

logger = logging.getLogger(__name__)

# Index order of every 4-vector and 4x4 matrix in the package
COORDINATES = ('v1', 'v2', 'u1', 'u2')

_UPPER_INDICES = [(i, j) for i in range(4) for j in range(i, 4)]


@dataclass(frozen=True)
class Params:
    """
    Mass ratio and energy parameter of the restricted three-body problem.

    The earth sits at the origin and the sun at 1; mu is the sun's share of
    the primary mass and the energy level studied is H = -c.
    """
    mu: float
    c: float

    def __post_init__(self):
        validate_mass_ratio(self.mu)
        validate_energy_parameter(self.c)

    @property
    def is_compact(self) -> bool:
        return self.mu < 1.0 and self.c > 1.5

    def require_compact(self) -> 'Params':
        """
        Reject parameters for which the earth component is not a compact,
        nondegenerate surface.

        Returns:
            Params: self, for chaining

        Raises:
            InvalidParamsError: if mu >= 1 or c <= 3/2
        """
        if self.mu >= 1.0:
            raise InvalidParamsError(
                f"mu={self.mu!r}: the earth component collapses onto the origin at mu = 1")
        if self.c <= 1.5:
            raise InvalidParamsError(f"c={self.c!r}: the energy parameter must exceed 3/2")
        return self


@dataclass(frozen=True)
class PhasePoint:
    """Rotating-frame position q and momentum p."""
    q1: float
    q2: float
    p1: float
    p2: float

    @property
    def q(self) -> complex:
        return complex(self.q1, self.q2)

    @property
    def p(self) -> complex:
        return complex(self.p1, self.p2)

    @classmethod
    def from_complex(cls, q: complex, p: complex) -> 'PhasePoint':
        return cls(float(q.real), float(q.imag), float(p.real), float(p.imag))


@dataclass(frozen=True)
class RegPoint:
    """Levi-Civita coordinates (v, u), stored in the order (v1, v2, u1, u2)."""
    v1: float
    v2: float
    u1: float
    u2: float

    @property
    def v(self) -> complex:
        return complex(self.v1, self.v2)

    @property
    def u(self) -> complex:
        return complex(self.u1, self.u2)

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2, self.u1, self.u2], dtype=float)

    @classmethod
    def from_array(cls, values) -> 'RegPoint':
        v1, v2, u1, u2 = (float(x) for x in values)
        return cls(v1, v2, u1, u2)

    @classmethod
    def from_complex(cls, v: complex, u: complex) -> 'RegPoint':
        return cls(float(v.real), float(v.imag), float(u.real), float(u.imag))


@dataclass(frozen=True)
class Tangent4:
    """A variation (v-hat, u-hat), same index order as RegPoint."""
    dv1: float
    dv2: float
    du1: float
    du2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dv1, self.dv2, self.du1, self.du2], dtype=float)

    @classmethod
    def from_array(cls, values) -> 'Tangent4':
        a, b, c, d = (float(x) for x in values)
        return cls(a, b, c, d)


@dataclass(frozen=True)
class SymMat4:
    """
    Symmetric 4x4 matrix stored as its upper triangle.

    `entries` lists the 10 values row by row: (00, 01, 02, 03, 11, 12, 13,
    22, 23, 33). Symmetry is structural: there is no lower triangle to
    disagree with.
    """
    entries: Tuple[float, ...]

    def __post_init__(self):
        if len(self.entries) != 10:
            raise ValueError(f"SymMat4 needs 10 entries, got {len(self.entries)}")

    def __getitem__(self, index):
        i, j = index
        if i > j:
            i, j = j, i
        return self.entries[_UPPER_INDICES.index((i, j))]

    def to_array(self) -> np.ndarray:
        m = np.empty((4, 4))
        for value, (i, j) in zip(self.entries, _UPPER_INDICES):
            m[i, j] = value
            m[j, i] = value
        return m

    def quadratic_form(self, h) -> float:
        """
        Evaluate m[h, h] from the stored triangle.

        Args:
            h: Tangent4 or array-like of length 4

        Returns:
            float: sum_ij m_ij h_i h_j
        """
        x = h.as_array() if isinstance(h, Tangent4) else np.asarray(h, dtype=float)
        total = 0.0
        for value, (i, j) in zip(self.entries, _UPPER_INDICES):
            total += value * x[i] * x[j] * (1.0 if i == j else 2.0)
        return float(total)

    @classmethod
    def from_array(cls, m) -> 'SymMat4':
        m = np.asarray(m, dtype=float)
        return cls(tuple(float(m[i, j]) for i, j in _UPPER_INDICES))


@dataclass(frozen=True)
class CriticalPoint:
    """A Lagrange point: label L1..L5, position q and the value of H there."""
    label: str
    q1: float
    q2: float
    value: float

    @property
    def q(self) -> complex:
        return complex(self.q1, self.q2)


# Constant second-derivative matrices in the order (v1, v2, u1, u2)
_KINETIC = np.diag([0.0, 0.0, 1.0, 1.0])
_D2F = np.diag([2.0, 2.0, 0.0, 0.0])
_D2G = np.array([[0.0, 0.0, 0.0, 1.0],
                 [0.0, 0.0, -1.0, 0.0],
                 [0.0, -1.0, 0.0, 0.0],
                 [1.0, 0.0, 0.0, 0.0]])
_D2_IM_UV = np.array([[0.0, 0.0, 0.0, 1.0],
                      [0.0, 0.0, 1.0, 0.0],
                      [0.0, 1.0, 0.0, 0.0],
                      [1.0, 0.0, 0.0, 0.0]])


def _outer(x, y):
    return x[..., :, None] * y[..., None, :]


def _symmetrized(x, y):
    return _outer(x, y) + _outer(y, x)


def _inner(a, b):
    """Euclidean inner product of complex numbers viewed as vectors in R^2."""
    return np.real(a * np.conj(b))


def _split(y):
    y = np.asarray(y, dtype=float)
    return y[..., 0] + 1j * y[..., 1], y[..., 2] + 1j * y[..., 3]


def levi_civita(z: RegPoint) -> PhasePoint:
    """
    Map regularized coordinates to the rotating frame: q = 2v^2, p = u / conj(v).

    The map is 2:1; (v, u) and (-v, -u) have the same image.

    Args:
        z: Point (v, u) with v != 0

    Returns:
        PhasePoint: The image (q, p)

    Raises:
        SingularityError: at v = 0
    """
    v, u = z.v, z.u
    if v == 0:
        raise SingularityError("levi_civita is undefined at v = 0 (earth collision)")
    return PhasePoint.from_complex(2.0 * v * v, u / v.conjugate())


class RegularizedSystem:
    """
    The regularized Hamiltonian K of the planar restricted three-body problem.

    K(v, u) = |v|^2 (H(q, p) + c) with (q, p) the Levi-Civita image of (v, u).
    Written out,

        K = 1/2 |u|^2 + 2|v|^2 <u, iv> - mu Im(uv) - (1 - mu)/2
            - mu |v|^2 / |2v^2 - 1| + c |v|^2.

    All first and second derivatives are closed forms. The Hessian matrix is
    the polarization of the closed-form quadratic form D^2K[h, h], worked out
    term by term into outer products of the gradients of |v|^2, <u, iv> and
    |2v^2 - 1|^2, so it is symmetric by construction.

    The vector field is the canonical one for the pairs (v_i, u_i). The
    factor 4 relating Re(dq ^ dp-bar) and Re(dv ^ du-bar) is dropped: the
    resulting flow is a constant rescaling of time and every period reported
    by the package is in this regularized time.

    Every method is a pure function of its arguments; instances hold only the
    parameters and may be shared between threads.
    """

    def __init__(self, params: Params, guard: float = settings.SINGULARITY_GUARD):
        """
        Initialize the system for one parameter pair.

        Args:
            params: Mass ratio and energy parameter
            guard: Smallest admissible |2v^2 - 1|
        """
        self.params = params
        self.mu = float(params.mu)
        self.c = float(params.c)
        self.guard = guard

    # ------------------------------------------------------------------
    # Original Hamiltonian and effective potential
    # ------------------------------------------------------------------

    def hamiltonian(self, z: PhasePoint) -> float:
        """
        Evaluate H(q, p) = 1/2|p|^2 + <p, iq> - <p, i mu> - (1-mu)/|q| - mu/|q-1|.

        Raises:
            SingularityError: when q is at a primary
        """
        q, p = z.q, z.p
        self._check_primaries(q)
        mu = self.mu
        return float(0.5 * abs(p) ** 2 + _inner(p, 1j * q) - _inner(p, 1j * mu)
                     - (1.0 - mu) / abs(q) - mu / abs(q - 1.0))

    def effective_potential(self, q) -> float:
        """
        U(q) = -1/2|q - mu|^2 - (1-mu)/|q| - mu/|q-1|.

        Critical points of H have p = -i(q - mu) and H = U(q) there.

        Args:
            q: Position as complex number or pair (q1, q2)

        Returns:
            float: U(q)
        """
        q = self._as_complex(q)
        self._check_primaries(q)
        mu = self.mu
        return float(-0.5 * abs(q - mu) ** 2 - (1.0 - mu) / abs(q) - mu / abs(q - 1.0))

    def effective_potential_gradient(self, q) -> np.ndarray:
        q = self._as_complex(q)
        self._check_primaries(q)
        mu = self.mu
        g = -(q - mu) + (1.0 - mu) * q / abs(q) ** 3 + mu * (q - 1.0) / abs(q - 1.0) ** 3
        return np.array([g.real, g.imag])

    def lagrange_points(self) -> List[CriticalPoint]:
        """
        Locate the five critical points of H, ordered by increasing value.

        The collinear points are roots of dU/dq1 on the real axis, one in each
        of (0, 1), (1, inf) and (-inf, 0). dU/dq1 is strictly decreasing on
        each interval, so brackets are found by a sign scan moving away from
        the primaries; bisection narrows them to LAGRANGE_XTOL and one Newton
        step polishes the root. The triangular points sit at (1/2, +-sqrt(3)/2)
        for every mu.

        Returns:
            List[CriticalPoint]: L1..L5

        Raises:
            InvalidParamsError: for mu in {0, 1} (critical circle, not points)
            RootFindingError: with bracket diagnostics if a search fails
        """
        mu = self.mu
        if not 0.0 < mu < 1.0:
            raise InvalidParamsError(
                f"mu={mu!r}: Lagrange points are isolated only for 0 < mu < 1")

        candidates = []
        for interval in ('inner', 'sun_side', 'earth_side'):
            x = self._collinear_root(interval)
            candidates.append(complex(x, 0.0))
        half_height = math.sqrt(3.0) / 2.0
        candidates.append(complex(0.5, half_height))
        candidates.append(complex(0.5, -half_height))

        valued = [(self.effective_potential(q), q) for q in candidates]
        valued.sort(key=lambda item: item[0])
        points = [CriticalPoint(f"L{k + 1}", q.real, q.imag, value)
                  for k, (value, q) in enumerate(valued)]
        logger.debug("Lagrange values for mu=%r: %s", mu, [p.value for p in points])
        return points

    def _collinear_slope(self, x: float) -> float:
        mu = self.mu
        return -(x - mu) + (1.0 - mu) * x / abs(x) ** 3 + mu * (x - 1.0) / abs(x - 1.0) ** 3

    def _collinear_curvature(self, x: float) -> float:
        mu = self.mu
        return -1.0 - 2.0 * (1.0 - mu) / abs(x) ** 3 - 2.0 * mu / abs(x - 1.0) ** 3

    def _collinear_root(self, interval: str) -> float:
        f = self._collinear_slope
        step = settings.LAGRANGE_SCAN_STEP
        # f decreases on every interval: positive at the left end, negative at the right
        if interval == 'inner':
            a, b = step, 1.0 - step
            while f(a) <= 0.0 and a > 1e-12:
                a *= 0.5
            while f(b) >= 0.0 and 1.0 - b > 1e-12:
                b = 1.0 - (1.0 - b) * 0.5
        elif interval == 'sun_side':
            a, b = 1.0 + step, 2.0
            while f(a) <= 0.0 and a - 1.0 > 1e-12:
                a = 1.0 + (a - 1.0) * 0.5
            while f(b) >= 0.0 and b < 1e6:
                b *= 2.0
        else:
            a, b = -2.0, -step
            while f(a) <= 0.0 and a > -1e6:
                a *= 2.0
            while f(b) >= 0.0 and b < -1e-12:
                b *= 0.5
        fa, fb = f(a), f(b)
        if not (fa > 0.0 > fb):
            raise RootFindingError(
                f"no sign change of dU/dq1 on the {interval} interval",
                bracket=(a, b), values=(fa, fb))
        x = bisect(f, a, b, xtol=settings.LAGRANGE_XTOL, maxiter=400)
        polished = x - f(x) / self._collinear_curvature(x)
        if a < polished < b and abs(f(polished)) <= abs(f(x)):
            x = polished
        return float(x)

    # ------------------------------------------------------------------
    # Regularized Hamiltonian and derivatives
    # ------------------------------------------------------------------

    def regularized_hamiltonian(self, z: RegPoint) -> float:
        return float(self.regularized_hamiltonian_batch(z.as_array()))

    def regularized_hamiltonian_batch(self, y) -> np.ndarray:
        """
        Evaluate K on an array of states of shape (..., 4).

        Raises:
            SingularityError: if any state has |2v^2 - 1| below the guard
        """
        v, u = _split(y)
        rho = self._collision_distance(v)
        mu, c = self.mu, self.c
        r2 = np.abs(v) ** 2
        return (0.5 * np.abs(u) ** 2 + 2.0 * r2 * _inner(u, 1j * v) - mu * np.imag(u * v)
                - 0.5 * (1.0 - mu) - mu * r2 / rho + c * r2)

    def directional_derivative(self, y, h) -> np.ndarray:
        """
        DK(y)[h] for states y of shape (..., 4) and one direction h.
        """
        v, u = _split(y)
        dv, du = _split(h)
        rho = self._collision_distance(v)
        mu, c = self.mu, self.c
        r2 = np.abs(v) ** 2
        w2 = 2.0 * v * v - 1.0

        df = 2.0 * _inner(v, dv)
        g = _inner(u, 1j * v)
        dg = _inner(du, 1j * v) + _inner(u, 1j * dv)
        dn = 8.0 * np.real(np.conj(w2) * v * dv)
        d_sun = df / rho - 0.5 * r2 * dn / rho ** 3

        return (_inner(u, du) + 2.0 * (df * g + r2 * dg)
                - mu * (np.imag(du * v) + np.imag(u * dv))
                - mu * d_sun + c * df)

    def hessian_form(self, y, h) -> np.ndarray:
        """
        The quadratic form D^2K(y)[h, h].

        With f = |v|^2, g = <u, iv> and N = |2v^2 - 1|^2 the sun term
        f N^(-1/2) contributes the |2v^2-1|^-3 and ^-5 parts below.

        Args:
            y: States, shape (..., 4)
            h: One direction, length 4

        Returns:
            np.ndarray: D^2K[h, h] for every state
        """
        v, u = _split(y)
        dv, du = _split(h)
        rho = self._collision_distance(v)
        mu, c = self.mu, self.c
        r2 = np.abs(v) ** 2
        w2 = 2.0 * v * v - 1.0
        dv_sq = np.abs(dv) ** 2

        df = 2.0 * _inner(v, dv)
        d2f = 2.0 * dv_sq
        g = _inner(u, 1j * v)
        dg = _inner(du, 1j * v) + _inner(u, 1j * dv)
        d2g = 2.0 * _inner(du, 1j * dv)
        dn = 8.0 * np.real(np.conj(w2) * v * dv)
        d2n = 32.0 * r2 * dv_sq + 8.0 * np.real(np.conj(w2) * dv * dv)
        d2_sun = (d2f / rho - df * dn / rho ** 3 - 0.5 * r2 * d2n / rho ** 3
                  + 0.75 * r2 * dn ** 2 / rho ** 5)

        return (np.abs(du) ** 2 + 2.0 * (d2f * g + 2.0 * df * dg + r2 * d2g)
                - 2.0 * mu * np.imag(du * dv) - mu * d2_sun + c * d2f)

    def grad_K(self, z: RegPoint) -> Tangent4:
        return Tangent4.from_array(self.grad_batch(z.as_array()))

    def grad_batch(self, y) -> np.ndarray:
        """Gradient of K in the order (v1, v2, u1, u2); shape (..., 4)."""
        basis = np.eye(4)
        return np.stack([self.directional_derivative(y, basis[k]) for k in range(4)], axis=-1)

    def hessian_K(self, z: RegPoint) -> SymMat4:
        return SymMat4.from_array(self.hessian_batch(z.as_array()))

    def hessian_batch(self, y) -> np.ndarray:
        """
        Hessian of K: the polarization of hessian_form, taken term by term.

        Each product of first derivatives in the quadratic form becomes a
        symmetrized outer product of gradients. With f = |v|^2, g = <u, iv>
        and N = |2v^2 - 1|^2,

            D^2K = I_u + (2g + c) D^2f + 2(df dg^T + dg df^T) + 2f D^2g
                   - mu D^2 Im(uv) - mu D^2(f N^(-1/2)).

        Args:
            y: States, shape (..., 4)

        Returns:
            np.ndarray: Symmetric matrices, shape (..., 4, 4)
        """
        y = np.asarray(y, dtype=float)
        v, _ = _split(y)
        rho = self._collision_distance(v)
        mu, c = self.mu, self.c
        v1, v2, u1, u2 = (y[..., k] for k in range(4))
        r2 = v1 * v1 + v2 * v2
        g = u2 * v1 - u1 * v2
        zero = np.zeros_like(r2)
        w2_bar = np.conj(2.0 * v * v - 1.0)
        a = w2_bar * v

        grad_f = np.stack([2.0 * v1, 2.0 * v2, zero, zero], axis=-1)
        grad_g = np.stack([u2, -u1, -v2, v1], axis=-1)
        grad_n = np.stack([8.0 * a.real, -8.0 * a.imag, zero, zero], axis=-1)

        d2n = np.zeros(y.shape[:-1] + (4, 4))
        d2n[..., 0, 0] = 32.0 * r2 + 8.0 * w2_bar.real
        d2n[..., 1, 1] = 32.0 * r2 - 8.0 * w2_bar.real
        d2n[..., 0, 1] = d2n[..., 1, 0] = -8.0 * w2_bar.imag

        rho = np.asarray(rho)[..., None, None]
        r2_ = np.asarray(r2)[..., None, None]
        d2_sun = (_D2F / rho - 0.5 * _symmetrized(grad_f, grad_n) / rho ** 3
                  - 0.5 * r2_ * d2n / rho ** 3
                  + 0.75 * r2_ * _outer(grad_n, grad_n) / rho ** 5)

        return (_KINETIC + np.asarray(2.0 * g + c)[..., None, None] * _D2F
                + 2.0 * _symmetrized(grad_f, grad_g) + 2.0 * r2_ * _D2G
                - mu * _D2_IM_UV - mu * d2_sun)

    def hamiltonian_vector_field(self, z: RegPoint) -> Tangent4:
        return Tangent4.from_array(self.vector_field_array(z.as_array()))

    def vector_field_array(self, y) -> np.ndarray:
        """(dK/du1, dK/du2, -dK/dv1, -dK/dv2) for states of shape (..., 4)."""
        grad = self.grad_batch(y)
        return np.stack([grad[..., 2], grad[..., 3], -grad[..., 0], -grad[..., 1]], axis=-1)

    # ------------------------------------------------------------------
    # Symmetries
    # ------------------------------------------------------------------

    @staticmethod
    def reversor(z: RegPoint) -> RegPoint:
        """rho(v, u) = (conj(v), -conj(u)); fixed set {v2 = 0, u1 = 0}."""
        return RegPoint(z.v1, -z.v2, -z.u1, z.u2)

    @staticmethod
    def double_cover(z: RegPoint) -> RegPoint:
        return RegPoint(-z.v1, -z.v2, -z.u1, -z.u2)

    # ------------------------------------------------------------------

    def _collision_distance(self, v) -> np.ndarray:
        rho = np.abs(2.0 * v * v - 1.0)
        if np.any(rho < self.guard):
            raise SingularityError(
                f"|2v^2 - 1| = {float(np.min(rho)):.3g} is below the guard {self.guard:g} "
                "(sun collision)")
        return rho

    @staticmethod
    def _check_primaries(q: complex):
        if abs(q) < settings.COLLISION_GUARD:
            raise SingularityError("q is at the earth (q = 0)")
        if abs(q - 1.0) < settings.COLLISION_GUARD:
            raise SingularityError("q is at the sun (q = 1)")

    @staticmethod
    def _as_complex(q) -> complex:
        if isinstance(q, complex):
            return q
        q1, q2 = q
        return complex(float(q1), float(q2))
