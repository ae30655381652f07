"""Maps from Euclidean parameters onto the hyperbolic models.

All maps consume the *last* Euclidean coordinate as the height (or radial)
coordinate. The ``*_array`` variants work on ``(n, d)`` matrices and are
what the attention operator calls; the scalar functions wrap them so the
two paths agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import NumericRangeError
from .geometry import HalfSpacePoint, HyperboloidPoint, _exp_map_arrays

__all__ = [
    "psi",
    "xi",
    "pseudopolar",
    "exp_origin_project",
    "hyperboloid_to_klein",
    "klein_to_hyperboloid",
    "einstein_midpoint",
    "project_array",
    "PROJECTIONS",
]

PROJECTIONS = ("psi", "xi", "exp_origin", "pseudopolar", "none")

# xi never returns a height below the smallest positive normal double, nor
# one equal to the light height.
XI_FLOOR = np.finfo(np.float64).tiny
# exp_origin_project keeps heights at most light_height * (1 - EXP_CLAMP_EPS).
EXP_CLAMP_EPS = 1e-9


def _as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"expected an (n, d) matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    return x


def psi_array(x):
    """``(x[:-1] * exp(x_d), exp(x_d))`` row by row."""
    x = _as_matrix(x)
    with np.errstate(over="ignore"):
        height = np.exp(x[:, -1])
    if not np.all(np.isfinite(height)):
        bad = int(np.flatnonzero(~np.isfinite(height))[0])
        raise NumericRangeError(f"psi: exp overflow in row {bad} (x_d = {float(x[bad, -1])!r})")
    if np.any(height == 0.0):
        bad = int(np.flatnonzero(height == 0.0)[0])
        raise NumericRangeError(f"psi: exp underflow in row {bad} (x_d = {float(x[bad, -1])!r})")
    out = np.empty_like(x)
    out[:, :-1] = x[:, :-1] * height[:, None]
    out[:, -1] = height
    return out


def xi_array(x, h=1.0):
    """Sigmoid-scaled map into the strip below the light source at height ``h``."""
    if h <= 0:
        raise ValueError("light height must be positive")
    x = _as_matrix(x)
    height = h * expit(x[:, -1])
    height = np.clip(height, XI_FLOOR, np.nextafter(h, 0.0))
    out = np.empty_like(x)
    out[:, :-1] = x[:, :-1] * height[:, None]
    out[:, -1] = height
    return out


def pseudopolar_array(x):
    """Rows ``(dir(x[:-1]) * sinh(x_d), cosh(x_d))`` on the hyperboloid."""
    x = _as_matrix(x)
    direction = x[:, :-1]
    t = x[:, -1]
    norms = np.linalg.norm(direction, axis=1)
    degenerate = (norms == 0.0) & (t != 0.0)
    if np.any(degenerate):
        bad = int(np.flatnonzero(degenerate)[0])
        raise ValueError(f"pseudopolar: zero direction with nonzero radius in row {bad}")
    safe = np.where(norms == 0.0, 1.0, norms)
    with np.errstate(over="ignore"):
        out = np.empty_like(x)
        out[:, :-1] = direction / safe[:, None] * np.sinh(t)[:, None]
        out[:, -1] = np.cosh(t)
    if not np.all(np.isfinite(out)):
        raise NumericRangeError("pseudopolar: sinh/cosh overflow")
    return out


def exp_origin_array(v, h=1.0):
    """Exponential map at ``(0, ..., 0, 1)`` with the height capped below ``h``."""
    v = _as_matrix(v)
    horizontal, height = _exp_map_arrays(np.zeros(v.shape[1] - 1), 1.0, v)
    ok = np.isfinite(height) & (height > 0.0) & np.all(np.isfinite(horizontal), axis=1)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise NumericRangeError(f"exp_origin: exp_map left the representable range in row {bad}")
    out = np.empty_like(v)
    out[:, :-1] = horizontal
    out[:, -1] = np.minimum(height, h * (1.0 - EXP_CLAMP_EPS))
    return out


def project_array(x, kind: str, h: float = 1.0):
    """Dispatch to one of :data:`PROJECTIONS`; ``"none"`` validates and copies."""
    if kind == "psi":
        return psi_array(x)
    if kind == "xi":
        return xi_array(x, h)
    if kind == "exp_origin":
        return exp_origin_array(x, h)
    if kind == "pseudopolar":
        return pseudopolar_array(x)
    if kind == "none":
        return _as_matrix(x).copy()
    raise ValueError(f"unknown projection {kind!r}; expected one of {PROJECTIONS}")


def _row(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a vector")
    return x[None, :]


def psi(x) -> HalfSpacePoint:
    return HalfSpacePoint.from_coords(psi_array(_row(x))[0])


def xi(x, h: float = 1.0) -> HalfSpacePoint:
    return HalfSpacePoint.from_coords(xi_array(_row(x), h)[0])


def pseudopolar(x) -> HyperboloidPoint:
    return HyperboloidPoint(pseudopolar_array(_row(x))[0])


def exp_origin_project(v, h: float = 1.0) -> HalfSpacePoint:
    return HalfSpacePoint.from_coords(exp_origin_array(_row(v), h)[0])


def hyperboloid_to_klein(p: HyperboloidPoint) -> np.ndarray:
    return p.coords[:-1] / p.coords[-1]


def klein_to_hyperboloid(x) -> HyperboloidPoint:
    x = np.asarray(x, dtype=np.float64)
    sq = x @ x
    if not sq < 1.0:
        raise ValueError(f"Klein point must lie in the open unit ball (|x|^2 = {sq!r})")
    return HyperboloidPoint(np.append(x, 1.0) / np.sqrt(1.0 - sq))


def einstein_midpoint(weights, points) -> np.ndarray:
    """Lorentz-factor weighted average of Klein-model points.

    ``weights`` are attention weights for one query (non-negative, summing
    to one); ``points`` is an ``(m, d)`` array of Klein vectors.
    """
    weights = np.asarray(weights, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if weights.size == 0 or points.shape[0] == 0:
        raise ValueError("einstein_midpoint needs at least one point")
    if weights.shape != (points.shape[0],):
        raise ValueError("need exactly one weight per point")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be non-negative and sum to 1")
    sq = np.einsum("ij,ij->i", points, points)
    if np.any(sq >= 1.0):
        raise ValueError("Klein points must lie in the open unit ball")
    lorentz = 1.0 / np.sqrt(1.0 - sq)
    coef = weights * lorentz
    return (coef / coef.sum()) @ points
