"""Poincare half-space and hyperboloid primitives.

Points of the half-space model are stored as a horizontal part (the first
``d - 1`` coordinates) and a strictly positive height (the last coordinate).
Every cone kernel in this package depends on a pair of points only through
the triple returned by :func:`reduce_to_plane`.

The vectorised ``*_margin`` helpers are the single source of truth for the
cone membership inequalities; the scalar predicates and the brute-force
oracle both go through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericRangeError

__all__ = [
    "HalfSpacePoint",
    "HyperboloidPoint",
    "halfspace_distance",
    "minkowski_inner",
    "hyperboloid_distance",
    "halfspace_to_hyperboloid",
    "hyperboloid_to_halfspace",
    "exp_map",
    "reduce_to_plane",
    "penumbral_margin",
    "umbral_margin",
    "penumbral_member",
    "umbral_member",
]

# exp_map switches to its Taylor expansion below this tangent norm.
EXP_SERIES_THRESHOLD = 1e-6


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class HalfSpacePoint:
    """A point ``(horizontal, height)`` of the upper half-space, height > 0."""

    horizontal: np.ndarray
    height: float

    def __post_init__(self):
        horizontal = _frozen(np.atleast_1d(self.horizontal))
        if horizontal.ndim != 1:
            raise ValueError("horizontal part must be a vector")
        height = float(self.height)
        if not (np.all(np.isfinite(horizontal)) and np.isfinite(height)):
            raise ValueError("half-space point coordinates must be finite")
        if height <= 0.0:
            raise ValueError(f"half-space height must be > 0, got {height!r}")
        object.__setattr__(self, "horizontal", horizontal)
        object.__setattr__(self, "height", height)

    @classmethod
    def from_coords(cls, coords) -> "HalfSpacePoint":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 1 or coords.size < 1:
            raise ValueError("coordinates must be a non-empty vector")
        return cls(coords[:-1], coords[-1])

    @property
    def dim(self) -> int:
        return self.horizontal.size + 1

    @property
    def coords(self) -> np.ndarray:
        return np.append(self.horizontal, self.height)

    def __eq__(self, other):
        if not isinstance(other, HalfSpacePoint):
            return NotImplemented
        return self.height == other.height and np.array_equal(self.horizontal, other.horizontal)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HyperboloidPoint:
    """A point on the upper sheet of ``<x, x>_M = -1`` in R^(d+1).

    The last (time-like) coordinate is recomputed from the spatial part on
    construction so the constraint holds to rounding.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 1 or coords.size < 2:
            raise ValueError("hyperboloid coordinates must be a vector of length >= 2")
        if not np.all(np.isfinite(coords)):
            raise ValueError("hyperboloid coordinates must be finite")
        if coords[-1] <= 0.0:
            raise ValueError("hyperboloid point must lie on the upper sheet (last coordinate > 0)")
        spatial = coords[:-1]
        coords[-1] = np.sqrt(1.0 + spatial @ spatial)
        if not np.isfinite(coords[-1]):
            raise NumericRangeError("hyperboloid time coordinate overflowed")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def dim(self) -> int:
        """Dimension of the hyperbolic space (ambient dimension minus one)."""
        return self.coords.size - 1

    def __eq__(self, other):
        if not isinstance(other, HyperboloidPoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    __hash__ = None


def _check_same_dim(u, v):
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} != {v.dim}")


def _arcosh(x):
    # Rounding can push the argument a hair below 1 for coincident points.
    return np.arccosh(np.maximum(x, 1.0))


def halfspace_distance(u: HalfSpacePoint, v: HalfSpacePoint) -> float:
    """Hyperbolic distance ``arcosh(1 + |u - v|^2 / (2 hu hv))``.

    Evaluated as ``2 asinh(|u - v| / (2 sqrt(hu hv)))``, the same function
    without the cancellation of ``arcosh`` near 1.
    """
    _check_same_dim(u, v)
    diff = u.coords - v.coords
    return float(2.0 * np.arcsinh(np.sqrt(diff @ diff / (4.0 * u.height * v.height))))


def minkowski_inner(p: HyperboloidPoint, q: HyperboloidPoint) -> float:
    """Lorentzian inner product, time-like coordinate last."""
    _check_same_dim(p, q)
    a, b = p.coords, q.coords
    return float(a[:-1] @ b[:-1] - a[-1] * b[-1])


def hyperboloid_distance(p: HyperboloidPoint, q: HyperboloidPoint) -> float:
    """``arcosh(-<p, q>_M)``, evaluated as ``2 asinh(|p - q|_M / 2)``.

    ``<p - q, p - q>_M = 2 cosh(d) - 2`` is formed from the difference, so
    coincident points give exactly 0.
    """
    _check_same_dim(p, q)
    diff = p.coords - q.coords
    sq = diff[:-1] @ diff[:-1] - diff[-1] * diff[-1]
    return float(2.0 * np.arcsinh(np.sqrt(max(sq, 0.0)) / 2.0))


def halfspace_to_hyperboloid(x: HalfSpacePoint) -> HyperboloidPoint:
    """Isometry from the half-space onto the hyperboloid."""
    y = x.height
    sq = x.horizontal @ x.horizontal + y * y
    spatial = np.append(x.horizontal / y, (1.0 - sq) / (2.0 * y))
    time = (1.0 + sq) / (2.0 * y)
    return HyperboloidPoint(np.append(spatial, time))


def hyperboloid_to_halfspace(p: HyperboloidPoint) -> HalfSpacePoint:
    """Inverse of :func:`halfspace_to_hyperboloid`."""
    c = p.coords
    y = 1.0 / (c[-1] + c[-2])
    return HalfSpacePoint(c[:-2] * y, y)


def _exp_map_arrays(base_horizontal, base_height, v):
    """Vectorised exponential map; ``v`` has shape (..., d).

    Returns ``(horizontal, height)`` without range checks.
    """
    v = np.asarray(v, dtype=np.float64)
    v_h, v_d = v[..., :-1], v[..., -1]
    sq_h = np.einsum("...i,...i->...", v_h, v_h)
    n = np.sqrt(sq_h + v_d * v_d)
    small = n < EXP_SERIES_THRESHOLD
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        n2 = n * n
        # Two-term Taylor expansions of n*coth(n) and cosh(n) - v_d*sinh(n)/n.
        series_step = base_height / (1.0 + n2 / 3.0 - v_d)
        series_height = base_height / (1.0 + n2 / 2.0 - v_d * (1.0 + n2 / 6.0))
        # a = n - v_d*tanh(n), rearranged to avoid cancellation when v is
        # nearly vertical and pointing up.
        tanh_n = np.tanh(n)
        one_minus_tanh = 2.0 / (np.exp(2.0 * n) + 1.0)
        up = sq_h / (n + v_d) + v_d * one_minus_tanh
        a = np.where(v_d > 0.0, up, n - v_d * tanh_n)
        step = np.where(small, series_step, base_height * tanh_n / a)
        height = np.where(small, series_height, base_height * n / (np.cosh(n) * a))
        horizontal = base_horizontal + step[..., None] * v_h
    return horizontal, height


def exp_map(x: HalfSpacePoint, v) -> HalfSpacePoint:
    """Exponential map of the half-space model at ``x``.

    ``v`` is given in the orthonormal frame at ``x`` (coordinate vector
    divided by ``x.height``), so the geodesic reaches distance ``||v||``.

    Raises :class:`NumericRangeError` when the result overflows or its
    height underflows to zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (x.dim,):
        raise ValueError(f"tangent vector must have shape ({x.dim},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("tangent vector must be finite")
    horizontal, height = _exp_map_arrays(x.horizontal, x.height, v)
    height = float(height)
    if not (np.isfinite(height) and height > 0.0 and np.all(np.isfinite(horizontal))):
        raise NumericRangeError(
            f"exp_map left the representable range (||v|| = {np.linalg.norm(v):g})"
        )
    return HalfSpacePoint(horizontal, height)


def reduce_to_plane(u: HalfSpacePoint, v: HalfSpacePoint) -> tuple[float, float, float]:
    """Return ``(delta, hu, hv)``: horizontal separation and the two heights."""
    _check_same_dim(u, v)
    delta = float(np.linalg.norm(u.horizontal - v.horizontal))
    return delta, u.height, v.height


def penumbral_margin(delta, parent_height, child_height, light_height):
    """Slack of the penumbral (two semicircle) membership test.

    The child must lie inside both radius-``light_height`` semicircles
    through the parent, centred at horizontal offsets ``-s`` and ``+s``.
    A point at height ``y`` is inside such a disk iff its horizontal offset
    from the centre is at most ``sqrt(h^2 - y^2)``; comparing offsets rather
    than squared radii keeps the test exactly reflexive.

    Non-negative iff the child lies in the parent's cone. Works elementwise
    on arrays.
    """
    delta = np.asarray(delta, dtype=np.float64)
    h2 = light_height * light_height
    s_parent = np.sqrt(h2 - np.square(parent_height))
    s_child = np.sqrt(h2 - np.square(child_height))
    left = s_child - np.abs(delta - s_parent)
    right = s_child - (delta + s_parent)
    return np.minimum(left, right)


def umbral_margin(delta, parent_height, child_height, ball_radius):
    """Slack of the umbral (Euclidean triangle) membership test."""
    return parent_height - np.asarray(delta, dtype=np.float64) / np.sinh(ball_radius) - child_height


def _below_light(p: HalfSpacePoint, light_height: float):
    if p.height >= light_height:
        raise ValueError(
            f"point at or above light source (height {p.height!r} >= {light_height!r})"
        )


def penumbral_member(parent: HalfSpacePoint, child: HalfSpacePoint, h: float = 1.0) -> bool:
    """True iff ``child`` lies in the penumbral cone of ``parent``."""
    if h <= 0:
        raise ValueError("light height must be positive")
    _below_light(parent, h)
    _below_light(child, h)
    delta, hp, hc = reduce_to_plane(parent, child)
    return bool(penumbral_margin(delta, hp, hc, h) >= 0.0)


def umbral_member(parent: HalfSpacePoint, child: HalfSpacePoint, r: float = 0.1) -> bool:
    """True iff ``child`` lies in the umbral cone of ``parent``."""
    if r <= 0:
        raise ValueError("ball radius must be positive")
    delta, hp, hc = reduce_to_plane(parent, child)
    return bool(umbral_margin(delta, hp, hc, r) >= 0.0)
