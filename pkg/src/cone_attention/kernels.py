"""Similarity logits for attention.

Cone kernels score a pair by the Euclidean height of the root of the
lowest cone containing both points (their geometric lowest common
ancestor); the logit is ``-gamma * height`` so that a deeper shared ancestor
gives a larger score. ``exp`` is never taken here: callers feed logits to a
softmax.

Every cone quantity is a function of ``(delta, hu, hv)`` only, see
:func:`cone_attention.geometry.reduce_to_plane`. The ``*_reduced`` functions
take those triples as arrays and are shared by the scalar API below and the
batched attention operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistencyError
from .geometry import (
    HalfSpacePoint,
    HyperboloidPoint,
    halfspace_distance,
    hyperboloid_distance,
    reduce_to_plane,
)
from .projections import PROJECTIONS

__all__ = [
    "KernelConfig",
    "KINDS",
    "CONE_KINDS",
    "penumbral_exists",
    "penumbral_height",
    "umbral_height",
    "cone_logit",
    "distance_logit",
    "laplacian_logit",
    "dot_logit",
    "penumbral_exists_reduced",
    "penumbral_height_reduced",
    "umbral_height_reduced",
    "cone_height_reduced",
]

KINDS = ("penumbral", "umbral", "dist_halfspace", "dist_hyperboloid", "laplacian", "dot")
CONE_KINDS = ("penumbral", "umbral")

_DEFAULT_PROJECTION = {
    "penumbral": "xi",
    "umbral": "psi",
    "dist_halfspace": "xi",
    "dist_hyperboloid": "pseudopolar",
    "laplacian": "none",
    "dot": "none",
}


@dataclass(frozen=True)
class KernelConfig:
    """Kernel kind plus its constants.

    ``light_height`` is the height of the horosphere light source used by
    penumbral cones (and by the ``xi`` / ``exp_origin`` projections);
    ``ball_radius`` is the umbral occluder radius. ``beta`` and ``c`` only
    matter for the distance kernels.
    """

    kind: str = "penumbral"
    gamma: float = 1.0
    light_height: float = 1.0
    ball_radius: float = 0.1
    beta: float = 1.0
    c: float = 0.0
    projection: str = "default"
    heads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        for name in ("gamma", "light_height", "ball_radius", "beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if not np.isfinite(self.c):
            raise ValueError("c must be finite")
        if self.projection != "default" and self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")
        if int(self.heads) != self.heads or self.heads < 1:
            raise ValueError("heads must be a positive integer")

    @property
    def resolved_projection(self) -> str:
        if self.projection == "default":
            return _DEFAULT_PROJECTION[self.kind]
        return self.projection


# --- reduced-plane closed forms -------------------------------------------


def _check_below_light(heights, h):
    heights = np.asarray(heights)
    if not np.all(heights > 0.0):
        raise ValueError("heights must be positive")
    if np.any(heights >= h):
        raise ValueError(f"point at or above light source (height >= {h!r})")


def _exists_oriented(delta, ha, hb, h):
    s_a = np.sqrt(h * h - ha * ha)
    return ((delta - s_a) ** 2 + hb * hb < h * h) | (delta <= s_a)


def penumbral_exists_reduced(delta, hu, hv, h=1.0):
    """Whether some penumbral cone below the light source contains both points."""
    delta, hu, hv = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (delta, hu, hv)))
    return _exists_oriented(delta, hu, hv, h) | _exists_oriented(delta, hv, hu, h)


def _penumbral_in_cone(delta, hu, hv, h):
    s_u, s_v = np.sqrt(h * h - hu * hu), np.sqrt(h * h - hv * hv)
    half = (s_u + s_v - delta) / 2.0
    with np.errstate(invalid="ignore"):
        mid = np.sqrt(h * h - half * half)
    top = np.maximum(hu, hv)
    # One point inside the other's cone: the middle term is at most the
    # higher point, but rounding can lift it a hair above.
    return np.where(delta <= np.abs(s_u - s_v), top, np.maximum(top, mid))


def _penumbral_fallback(delta, hu, hv):
    # Radius of the semicircle through both points. Ordering the heights
    # makes the result bitwise symmetric in (u, v).
    lo, hi = np.minimum(hu, hv), np.maximum(hu, hv)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (delta * delta + lo * lo - hi * hi) / (2.0 * delta)
    return np.sqrt(x * x + hi * hi)


def penumbral_height_reduced(delta, hu, hv, h=1.0):
    """Height of the penumbral sup of two points, vectorised.

    Out of cone (no common cone below the light) this is the height of the
    lowest light source for which a common cone would exist.
    """
    delta, hu, hv = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (delta, hu, hv)))
    _check_below_light(hu, h)
    _check_below_light(hv, h)
    exists = penumbral_exists_reduced(delta, hu, hv, h)
    if np.any(~exists & (delta == 0.0)):
        raise InconsistencyError("penumbral existence failed for coincident horizontals")
    return np.where(exists, _penumbral_in_cone(delta, hu, hv, h), _penumbral_fallback(delta, hu, hv))


def umbral_height_reduced(delta, hu, hv, r=0.1):
    delta = np.asarray(delta, dtype=np.float64)
    mid = delta / (2.0 * np.sinh(r)) + (hu + hv) / 2.0
    return np.maximum(np.maximum(hu, hv), mid)


def cone_height_reduced(delta, hu, hv, config: KernelConfig):
    if config.kind == "penumbral":
        return penumbral_height_reduced(delta, hu, hv, config.light_height)
    if config.kind == "umbral":
        return umbral_height_reduced(delta, hu, hv, config.ball_radius)
    raise ValueError(f"{config.kind!r} is not a cone kernel")


# --- scalar API -------------------------------------------------------------


def penumbral_exists(u: HalfSpacePoint, v: HalfSpacePoint, h: float = 1.0) -> bool:
    delta, hu, hv = reduce_to_plane(u, v)
    _check_below_light([hu, hv], h)
    return bool(penumbral_exists_reduced(delta, hu, hv, h))


def penumbral_height(u: HalfSpacePoint, v: HalfSpacePoint, h: float = 1.0) -> float:
    return float(penumbral_height_reduced(*reduce_to_plane(u, v), h))


def umbral_height(u: HalfSpacePoint, v: HalfSpacePoint, r: float = 0.1) -> float:
    return float(umbral_height_reduced(*reduce_to_plane(u, v), r))


def cone_logit(u: HalfSpacePoint, v: HalfSpacePoint, config: KernelConfig) -> float:
    """``-gamma * height(sup(u, v))`` for a penumbral or umbral config."""
    return float(-config.gamma * cone_height_reduced(*reduce_to_plane(u, v), config))


def distance_logit(u, v, beta: float = 1.0, c: float = 0.0) -> float:
    """``-beta * d(u, v) - c``; the model is taken from the point type."""
    if isinstance(u, HalfSpacePoint) and isinstance(v, HalfSpacePoint):
        d = halfspace_distance(u, v)
    elif isinstance(u, HyperboloidPoint) and isinstance(v, HyperboloidPoint):
        d = hyperboloid_distance(u, v)
    else:
        raise TypeError("distance_logit needs two points of the same model")
    return -beta * d - c


def laplacian_logit(u, v, gamma: float = 1.0) -> float:
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} != {v.shape}")
    return float(-gamma * np.linalg.norm(u - v))


def dot_logit(u, v, d: int | None = None) -> float:
    """Scaled dot product ``u . v / sqrt(d)``; ``d`` defaults to ``len(u)``."""
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} != {v.shape}")
    d = u.size if d is None else d
    if d <= 0:
        raise ValueError("d must be positive")
    return float(u @ v / np.sqrt(d))
