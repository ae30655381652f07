"""Independent recomputation of sup heights and tree LCAs.

Two families of oracles live here:

* semi-analytic ones that intersect the bounding geodesics (penumbral) or
  lines (umbral) of the two cones numerically, and
* a brute-force search that only ever asks the membership predicates of
  :mod:`cone_attention.geometry` whether a candidate root's cone contains
  both points.

Neither calls the closed forms of :mod:`cone_attention.kernels`; the brute
force consults the kernel's existence predicate only to flag disagreement.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import InconsistencyError
from .geometry import HalfSpacePoint, penumbral_margin, reduce_to_plane, umbral_margin
from .kernels import KernelConfig, penumbral_exists_reduced
from .tree import TreeSpec

__all__ = [
    "oracle_sup2_penumbral",
    "oracle_sup2_umbral",
    "oracle_min_lightsource",
    "oracle_bruteforce_height",
    "oracle_bruteforce_root",
    "min_root_heights",
    "distance_to_light",
    "lca",
    "lca_depth",
    "sample_pairs",
]

BISECTION_TOL = 1e-9
DEFAULT_GRID = 2000


# --- semi-analytic ----------------------------------------------------------


def _bisect(fn, lo, hi, tol):
    """Root of an increasing scalar function on [lo, hi] by bisection."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo > 0 or f_hi < 0:
        raise InconsistencyError("bisection bracket does not contain a sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _reduced_point(x, y):
    return HalfSpacePoint([x], y)


def oracle_sup2_penumbral(u: HalfSpacePoint, v: HalfSpacePoint, h: float = 1.0, tol: float = BISECTION_TOL):
    """Height and reduced-plane root of the lowest penumbral cone holding u and v.

    Works in the plane with ``u`` at horizontal 0 and ``v`` at ``delta``.
    Intersects the right bounding semicircle of ``u`` with the left one of
    ``v`` by bisection.
    """
    delta, hu, hv = reduce_to_plane(u, v)
    if max(hu, hv) >= h:
        raise ValueError("point at or above light source")
    if penumbral_margin(delta, hu, hv, h) >= 0:
        return hu, _reduced_point(0.0, hu)
    if penumbral_margin(delta, hv, hu, h) >= 0:
        return hv, _reduced_point(delta, hv)
    centre_u = np.sqrt(h * h - hu * hu)
    centre_v = delta - np.sqrt(h * h - hv * hv)
    lo, hi = max(0.0, centre_v), min(delta, centre_u)
    if not lo < hi:
        raise InconsistencyError("bounding semicircles do not meet below the light source")

    def arc_u(x):
        return np.sqrt(max(h * h - (x - centre_u) ** 2, 0.0))

    def arc_v(x):
        return np.sqrt(max(h * h - (x - centre_v) ** 2, 0.0))

    x = _bisect(lambda t: arc_u(t) - arc_v(t), lo, hi, tol)
    y = 0.5 * (arc_u(x) + arc_v(x))
    if y >= h:
        raise InconsistencyError("bounding semicircles meet at or above the light source")
    height = max(hu, hv, y)
    return height, _reduced_point(x, height)


def oracle_sup2_umbral(u: HalfSpacePoint, v: HalfSpacePoint, r: float = 0.1):
    """Height and reduced-plane root of the lowest umbral cone holding u and v."""
    delta, hu, hv = reduce_to_plane(u, v)
    if umbral_margin(delta, hu, hv, r) >= 0:
        return hu, _reduced_point(0.0, hu)
    if umbral_margin(delta, hv, hu, r) >= 0:
        return hv, _reduced_point(delta, hv)
    k = np.sinh(r)
    # y - x/k = hu (edge through u) and y + x/k = hv + delta/k (edge through v)
    system = np.array([[-1.0 / k, 1.0], [1.0 / k, 1.0]])
    x, y = np.linalg.solve(system, [hu, hv + delta / k])
    height = max(hu, hv, y)
    return height, _reduced_point(x, height)


def oracle_min_lightsource(u: HalfSpacePoint, v: HalfSpacePoint) -> float:
    """Radius of the axis-centred semicircle through both points."""
    delta, hu, hv = reduce_to_plane(u, v)
    if delta == 0.0:
        raise ValueError("lowest light source is undefined for vertically aligned points")

    def imbalance(x):
        return (x * x + hu * hu) - ((delta - x) ** 2 + hv * hv)

    bound = (delta * delta + hu * hu + hv * hv) / delta + 1.0
    x = brentq(imbalance, -bound, bound, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(np.sqrt(x * x + hu * hu))


# --- brute force -------------------------------------------------------------


def _margin(config: KernelConfig, light: float | None = None):
    if config.kind == "penumbral":
        h = config.light_height if light is None else light
        return lambda delta, ph, wh: penumbral_margin(delta, ph, wh, h)
    if config.kind == "umbral":
        r = config.ball_radius
        return lambda delta, ph, wh: umbral_margin(delta, ph, wh, r)
    raise ValueError(f"{config.kind!r} is not a cone kernel")


def _height_bounds(delta, hu, hv, config: KernelConfig):
    lo = max(hu, hv)
    if config.kind == "penumbral":
        return lo, np.nextafter(config.light_height, 0.0)
    return lo, lo + delta / np.sinh(config.ball_radius) + 1.0


def min_root_heights(u: HalfSpacePoint, v: HalfSpacePoint, config: KernelConfig, positions, rtol: float = 1e-13):
    """Lowest root height at each candidate root horizontal position.

    ``positions`` is a ``(k, d - 1)`` array. For each one the root height is
    bisected to relative width ``rtol`` using only the membership predicates
    (membership is monotone in the root height). Positions whose cone cannot
    contain both points below the height bound get ``inf``.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    delta = float(np.linalg.norm(u.horizontal - v.horizontal))
    lo, hi = _height_bounds(delta, u.height, v.height, config)
    margin = _margin(config)
    du = np.linalg.norm(positions - u.horizontal, axis=1)
    dv = np.linalg.norm(positions - v.horizontal, axis=1)

    def holds(ph):
        return (margin(du, ph, u.height) >= 0.0) & (margin(dv, ph, v.height) >= 0.0)

    a = np.full(du.shape, lo)
    b = np.full(du.shape, hi)
    feasible = holds(b)
    at_floor = holds(a)
    while np.max(b - a) > rtol * hi:
        mid = 0.5 * (a + b)
        ok = holds(mid)
        b = np.where(ok, mid, b)
        a = np.where(ok, a, mid)
    out = np.where(at_floor, lo, b)
    return np.where(feasible, out, np.inf)


def _zoom(fn, a, b, grid, fine=513, rounds=40):
    """Minimise a unimodal function sampled on a grid, zooming on the best cell.

    ``fine`` is odd so every refinement grid contains the previous best
    point; the running minimum never increases.
    """
    t = np.linspace(a, b, grid)
    vals = fn(t)
    j = int(np.argmin(vals))
    if not np.isfinite(vals[j]):
        return float(vals[j]), float(t[j])
    for _ in range(rounds):
        lo, hi = t[max(j - 1, 0)], t[min(j + 1, t.size - 1)]
        if hi - lo <= 1e-12 * max(1.0, abs(t[j])):
            break
        t = np.linspace(lo, hi, fine)
        vals = fn(t)
        j = int(np.argmin(vals))
    return float(vals[j]), float(t[j])


class _Segment:
    """Root candidates on the horizontal line through u and v."""

    def __init__(self, u: HalfSpacePoint, v: HalfSpacePoint):
        self.origin = u.horizontal
        diff = v.horizontal - u.horizontal
        self.delta = float(np.linalg.norm(diff))
        if self.delta > 0.0:
            self.direction = diff / self.delta
        else:
            self.direction = np.zeros_like(diff)
            if diff.size:
                self.direction[0] = 1.0

    def at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return self.origin + t[:, None] * self.direction


def _lowest_light(u, v, seg: _Segment, grid: int) -> float:
    """Lowest light height for which some penumbral cone contains u and v.

    Bisection on the light height; feasibility asks whether a root at the
    light height (the closure of the admissible roots) contains both points.
    """
    hu, hv = u.height, v.height
    pad = seg.delta + max(hu, hv)

    def best_margin(light):
        margin = _margin(KernelConfig("penumbral", light_height=light), light)

        def neg(t):
            p = seg.at(t)
            du = np.linalg.norm(p - u.horizontal, axis=1)
            dv = np.linalg.norm(p - v.horizontal, axis=1)
            return -np.minimum(margin(du, light, hu), margin(dv, light, hv))

        value, _ = _zoom(neg, -pad, seg.delta + pad, grid)
        return -value

    lo = max(hu, hv)
    hi = 2.0 * (pad + lo)
    if best_margin(hi) < 0:
        raise InconsistencyError("no light height admits a common cone")
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if best_margin(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def oracle_bruteforce_root(u: HalfSpacePoint, v: HalfSpacePoint, config: KernelConfig, grid: int = DEFAULT_GRID):
    """Brute-force the lowest common cone root of ``u`` and ``v``.

    Scans ``grid`` root positions along the horizontal line through the two
    points (the optimum lies in the vertical plane containing them),
    bisects the lowest feasible height of each, then zooms in on the best
    cell. For penumbral pairs with no common cone below the light source the
    lowest sufficient light height is searched instead, and the returned
    root is ``None``.

    Returns ``(height, root)``; ``root`` is in the original coordinates.
    """
    if config.kind not in ("penumbral", "umbral"):
        raise ValueError(f"{config.kind!r} is not a cone kernel")
    if grid < 3:
        raise ValueError("grid must have at least 3 points")
    seg = _Segment(u, v)
    delta = seg.delta
    if config.kind == "penumbral":
        if max(u.height, v.height) >= config.light_height:
            raise ValueError("point at or above light source")
        width = config.light_height
    else:
        width = delta / np.sinh(config.ball_radius) + 1.0

    def heights(t):
        return min_root_heights(u, v, config, seg.at(t))

    best, t_best = _zoom(heights, -width, delta + width, grid)
    exists = config.kind == "umbral" or bool(
        penumbral_exists_reduced(delta, u.height, v.height, config.light_height)
    )
    if not np.isfinite(best) and exists:
        # Only a sliver of root positions works; find one by maximising the
        # membership slack of a root just below the light, then zoom again.
        top = np.nextafter(config.light_height, 0.0)
        margin = _margin(config)

        def neg_slack(t):
            p = seg.at(t)
            du = np.linalg.norm(p - u.horizontal, axis=1)
            dv = np.linalg.norm(p - v.horizontal, axis=1)
            return -np.minimum(margin(du, top, u.height), margin(dv, top, v.height))

        slack, t_best = _zoom(neg_slack, -width, delta + width, grid)
        if -slack >= 0:
            # t_best itself is feasible; shrink the window until the grid
            # resolves the sliver around it.
            best = float(heights(t_best)[0])
            window = (delta + 2 * width) / grid
            while window > 1e-12 * max(1.0, abs(t_best)):
                h, t = _zoom(heights, t_best - window, t_best + window, 65)
                if h < best:
                    best, t_best = h, t
                    break
                window /= 4.0
    if np.isfinite(best):
        if not exists:
            raise InconsistencyError("brute force found a common cone the existence predicate rejects")
        return best, HalfSpacePoint(seg.at(t_best)[0], best)
    if exists:
        raise InconsistencyError("existence predicate accepts a pair with no feasible root")
    return _lowest_light(u, v, seg, grid), None


def oracle_bruteforce_height(u: HalfSpacePoint, v: HalfSpacePoint, config: KernelConfig, grid: int = DEFAULT_GRID) -> float:
    return oracle_bruteforce_root(u, v, config, grid)[0]


def distance_to_light(point: HalfSpacePoint, light_height: float) -> float:
    """Hyperbolic distance from ``point`` up to the horosphere at ``light_height``."""
    if point.height >= light_height:
        raise ValueError("point is not below the horosphere")
    return float(np.log(light_height / point.height))


def sample_pairs(config: KernelConfig, count: int, seed: int, dim: int = 2):
    """Seeded random point pairs for oracle comparisons.

    Penumbral heights are uniform in ``(0.02h, 0.98h)`` with horizontal gaps
    up to ``2.5h``, which yields a mix of in-cone and out-of-cone pairs.
    Umbral heights are uniform in ``(0.02, 2)`` with gaps up to 1.
    """
    if config.kind not in ("penumbral", "umbral"):
        raise ValueError(f"{config.kind!r} is not a cone kernel")
    rng = np.random.default_rng(seed)
    if config.kind == "penumbral":
        h = config.light_height
        heights = rng.uniform(0.02 * h, 0.98 * h, size=(count, 2))
        gaps = rng.uniform(0.0, 2.5 * h, size=count)
    else:
        heights = rng.uniform(0.02, 2.0, size=(count, 2))
        gaps = rng.uniform(0.0, 1.0, size=count)
    base = rng.uniform(-1.0, 1.0, size=(count, dim - 1))
    direction = rng.standard_normal((count, dim - 1))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    pairs = []
    for k in range(count):
        u = HalfSpacePoint(base[k], heights[k, 0])
        v = HalfSpacePoint(base[k] + gaps[k] * direction[k], heights[k, 1])
        pairs.append((u, v))
    return pairs


# --- trees --------------------------------------------------------------------


def lca(tree: TreeSpec, a, b) -> int:
    """Lowest common ancestor by walking parent pointers."""
    a, b = tree.check_node(a), tree.check_node(b)
    depth, parent = tree.depth, tree.parent
    while depth[a] > depth[b]:
        a = parent[a]
    while depth[b] > depth[a]:
        b = parent[b]
    while a != b:
        a, b = parent[a], parent[b]
    return int(a)


def lca_depth(tree: TreeSpec, a, b) -> int:
    return int(tree.depth[lca(tree, a, b)])
