"""Analytic first derivatives of logits and projections.

Everything is hand-derived over a fixed computation graph: a logit of two
projected points, chained with the Jacobian of the projection. Cone logits
are only piecewise smooth. At a tie inside ``max(hu, hv, middle)`` the
branch is picked by argument order (``hu``, then ``hv``, then the middle
expression). Crossing the penumbral existence boundary keeps the logit
continuous but the gradient jumps. Points within ``NONSMOOTH_TOL`` of any
kink are flagged.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit

from .geometry import EXP_SERIES_THRESHOLD, HalfSpacePoint, HyperboloidPoint, _exp_map_arrays
from .kernels import CONE_KINDS, KernelConfig, cone_height_reduced, penumbral_exists_reduced
from .projections import EXP_CLAMP_EPS, XI_FLOOR, project_array

__all__ = [
    "LogitGrad",
    "NONSMOOTH_TOL",
    "pair_logit_grads",
    "kink_distance",
    "cone_logit_grad",
    "logit_grad",
    "projection_jacobian",
    "projection_jacobian_array",
    "euclidean_pair_grads",
    "finite_diff_check",
    "gradient_check",
    "SMOOTH_GAP",
]

NONSMOOTH_TOL = 1e-9
# Sample points closer than this to a kink are skipped by gradient_check.
SMOOTH_GAP = 1e-3


class LogitGrad(NamedTuple):
    value: float
    grad_u: np.ndarray
    grad_v: np.ndarray
    nonsmooth: bool


def _pick(hu, hv, mid):
    """Branch index per element: 0 -> hu, 1 -> hv, 2 -> middle expression."""
    return np.where((hu >= hv) & (hu >= mid), 0, np.where(hv >= mid, 1, 2))


def _top_gap(*cands):
    stacked = np.sort(np.stack(cands), axis=0)
    return stacked[-1] - stacked[-2]


def _cone_parts(diff, hu, hv, config: KernelConfig):
    """Height, its partials and distance-to-kink for cone kernels.

    ``diff`` is ``u_h - v_h`` with shape (k, d - 1). Returns
    ``(height, d_du_h, d_dhu, d_dhv, gap)``; the partials with respect to
    ``v_h`` are ``-d_du_h``.
    """
    delta = np.linalg.norm(diff, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(delta[:, None] > 0, diff / delta[:, None], 0.0)
    zeros = np.zeros_like(hu)

    if config.kind == "umbral":
        two_k = 2.0 * np.sinh(config.ball_radius)
        mid = delta / two_k + (hu + hv) / 2.0
        branch = _pick(hu, hv, mid)
        height = np.choose(branch, [hu, hv, mid])
        d_delta = np.where(branch == 2, 1.0 / two_k, 0.0)
        d_hu = np.choose(branch, [np.ones_like(hu), zeros, np.full_like(hu, 0.5)])
        d_hv = np.choose(branch, [zeros, np.ones_like(hu), np.full_like(hu, 0.5)])
        gap = _top_gap(hu, hv, mid)
        gap = np.where(branch == 2, np.minimum(gap, delta), gap)
        return height, d_delta[:, None] * unit, d_hu, d_hv, gap

    if config.kind != "penumbral":
        raise ValueError(f"{config.kind!r} is not a cone kernel")
    h = config.light_height
    s_u = np.sqrt(h * h - hu * hu)
    s_v = np.sqrt(h * h - hv * hv)
    exists = penumbral_exists_reduced(delta, hu, hv, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = (s_u + s_v - delta) / 2.0
        mid = np.sqrt(h * h - m * m)
        branch = _pick(hu, hv, mid)
        in_height = np.choose(branch, [hu, hv, mid])
        in_d_delta = np.where(branch == 2, m / (2.0 * mid), 0.0)
        in_d_hu = np.choose(branch, [np.ones_like(hu), zeros, m * hu / (2.0 * mid * s_u)])
        in_d_hv = np.choose(branch, [zeros, np.ones_like(hu), m * hv / (2.0 * mid * s_v)])

        x = (delta * delta + hu * hu - hv * hv) / (2.0 * delta)
        out_height = np.sqrt(x * x + hv * hv)
        out_d_delta = x * (delta * delta - hu * hu + hv * hv) / (2.0 * delta * delta * out_height)
        out_d_hu = x * hu / (delta * out_height)
        out_d_hv = hv * (1.0 - x / delta) / out_height

    height = np.where(exists, in_height, out_height)
    d_delta = np.where(exists, in_d_delta, out_d_delta)
    d_hu = np.where(exists, in_d_hu, out_d_hu)
    d_hv = np.where(exists, in_d_hv, out_d_hv)
    gap = np.abs(s_u + s_v - delta)
    gap = np.where(exists, np.minimum(gap, _top_gap(hu, hv, mid)), gap)
    uses_delta = ~exists | (branch == 2)
    gap = np.where(uses_delta, np.minimum(gap, delta), gap)
    return height, d_delta[:, None] * unit, d_hu, d_hv, gap


def pair_logit_grads(P, Q, config: KernelConfig):
    """Logits of row pairs ``(P[i], Q[i])`` and their gradients.

    ``P`` and ``Q`` are already projected: half-space coordinates for cone
    and ``dist_halfspace`` kernels, hyperboloid coordinates for
    ``dist_hyperboloid``, raw vectors otherwise. Returns
    ``(logits, grad_P, grad_Q, gap)`` where ``gap`` is the distance to the
    nearest kink (``inf`` for smooth kernels).
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch: {P.shape} != {Q.shape}")
    kind = config.kind

    if kind in CONE_KINDS:
        hu, hv = P[:, -1], Q[:, -1]
        diff = P[:, :-1] - Q[:, :-1]
        # Value from the kernel module itself (also validates the light height).
        height = cone_height_reduced(np.linalg.norm(diff, axis=1), hu, hv, config)
        _, d_uh, d_hu, d_hv, gap = _cone_parts(diff, hu, hv, config)
        g = -config.gamma
        grad_P = np.concatenate([g * d_uh, (g * d_hu)[:, None]], axis=1)
        grad_Q = np.concatenate([-g * d_uh, (g * d_hv)[:, None]], axis=1)
        return g * height, grad_P, grad_Q, gap

    if kind == "dist_halfspace":
        hu, hv = P[:, -1], Q[:, -1]
        diff = P - Q
        q = np.einsum("ij,ij->i", diff, diff)
        prod = hu * hv
        arg = np.maximum(1.0 + q / (2.0 * prod), 1.0)
        dist = 2.0 * np.arcsinh(np.sqrt(q / (4.0 * prod)))
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(arg > 1.0, 1.0 / np.sqrt(arg * arg - 1.0), 0.0)
        d_arg_P = diff / prod[:, None]
        d_arg_P[:, -1] -= q / (2.0 * hu * prod)
        d_arg_Q = -diff / prod[:, None]
        d_arg_Q[:, -1] -= q / (2.0 * hv * prod)
        b = -config.beta
        return (
            b * dist - config.c,
            b * scale[:, None] * d_arg_P,
            b * scale[:, None] * d_arg_Q,
            arg - 1.0,
        )

    if kind == "dist_hyperboloid":
        inner = np.einsum("ij,ij->i", P[:, :-1], Q[:, :-1]) - P[:, -1] * Q[:, -1]
        arg = np.maximum(-inner, 1.0)
        diff = P - Q
        sq = np.einsum("ij,ij->i", diff[:, :-1], diff[:, :-1]) - diff[:, -1] ** 2
        dist = 2.0 * np.arcsinh(np.sqrt(np.maximum(sq, 0.0)) / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(arg > 1.0, 1.0 / np.sqrt(arg * arg - 1.0), 0.0)
        flip = np.ones(P.shape[1])
        flip[-1] = -1.0
        b = -config.beta
        # d(-<p, q>)/dp = (-q_spatial, q_time)
        return (
            b * dist - config.c,
            b * scale[:, None] * (-Q * flip),
            b * scale[:, None] * (-P * flip),
            arg - 1.0,
        )

    if kind == "laplacian":
        diff = P - Q
        norm = np.linalg.norm(diff, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(norm[:, None] > 0, diff / norm[:, None], 0.0)
        g = config.gamma
        return -g * norm, -g * unit, g * unit, norm

    if kind == "dot":
        scale = 1.0 / np.sqrt(P.shape[1])
        logits = np.einsum("ij,ij->i", P, Q) * scale
        return logits, Q * scale, P * scale, np.full(P.shape[0], np.inf)

    raise ValueError(f"unknown kernel kind {kind!r}")


def kink_distance(P, Q, config: KernelConfig) -> np.ndarray:
    """Distance of each projected pair to the nearest non-smooth point."""
    return pair_logit_grads(P, Q, config)[3]


def _as_coords(p):
    if isinstance(p, (HalfSpacePoint, HyperboloidPoint)):
        return p.coords
    return np.asarray(p, dtype=np.float64)


def logit_grad(u, v, config: KernelConfig) -> LogitGrad:
    """Gradient of the configured logit with respect to both (projected) points."""
    if config.kind == "dist_hyperboloid":
        if not (isinstance(u, HyperboloidPoint) and isinstance(v, HyperboloidPoint)):
            raise TypeError("dist_hyperboloid gradients need hyperboloid points")
    elif config.kind in CONE_KINDS or config.kind == "dist_halfspace":
        if not (isinstance(u, HalfSpacePoint) and isinstance(v, HalfSpacePoint)):
            raise TypeError(f"{config.kind} gradients need half-space points")
    a, b = _as_coords(u), _as_coords(v)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} != {b.shape}")
    logits, gu, gv, gap = pair_logit_grads(a[None, :], b[None, :], config)
    return LogitGrad(float(logits[0]), gu[0], gv[0], bool(gap[0] < NONSMOOTH_TOL))


def cone_logit_grad(u: HalfSpacePoint, v: HalfSpacePoint, config: KernelConfig) -> LogitGrad:
    if config.kind not in CONE_KINDS:
        raise ValueError(f"{config.kind!r} is not a cone kernel")
    return logit_grad(u, v, config)


# --- projections -------------------------------------------------------------


def _exp_origin_jacobian(V, h):
    k, d = V.shape
    v_h, v_d = V[:, :-1], V[:, -1]
    sq_h = np.einsum("ij,ij->i", v_h, v_h)
    n = np.sqrt(sq_h + v_d * v_d)
    small = n < 1e-3
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tanh_n = np.tanh(n)
        one_minus_tanh = 2.0 / (np.exp(2.0 * n) + 1.0)
        a = np.where(v_d > 0.0, sq_h / (n + v_d) + v_d * one_minus_tanh, n - v_d * tanh_n)
        # d1 = n coth n - v_d, d2 = cosh n - v_d sinh(n)/n
        d1 = np.where(n < EXP_SERIES_THRESHOLD, 1.0 + n * n / 3.0 - v_d, a / tanh_n)
        d2 = np.where(
            n < EXP_SERIES_THRESHOLD,
            1.0 + n * n / 2.0 - v_d * (1.0 + n * n / 6.0),
            np.cosh(n) * a / n,
        )
        sinhc = np.where(small, 1.0 + n * n / 6.0, np.sinh(n) / n)
        # (d/dn of n coth n) / n and (d/dn of sinh(n)/n) / n
        dphi = np.where(small, 2.0 / 3.0 - 4.0 * n * n / 45.0, (1.0 / tanh_n - n / np.sinh(n) ** 2) / n)
        dpsi = np.where(small, 1.0 / 3.0 + n * n / 30.0, (n * np.cosh(n) - np.sinh(n)) / n**3)
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    grad_d1 = dphi[:, None] * V - e_d
    grad_d2 = (sinhc - v_d * dpsi)[:, None] * V - sinhc[:, None] * e_d
    J = np.zeros((k, d, d))
    J[:, :-1, :] = -(v_h / (d1 * d1)[:, None])[:, :, None] * grad_d1[:, None, :]
    idx = np.arange(d - 1)
    J[:, idx, idx] += (1.0 / d1)[:, None]
    height = 1.0 / d2
    clamped = height > h * (1.0 - EXP_CLAMP_EPS)
    J[:, -1, :] = np.where(clamped[:, None], 0.0, -grad_d2 / (d2 * d2)[:, None])
    return J


def projection_jacobian_array(X, kind: str, h: float = 1.0) -> np.ndarray:
    """Per-row Jacobians of a projection, shape ``(k, d_point, d)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    k, d = X.shape
    idx = np.arange(d - 1)
    if kind == "none":
        return np.broadcast_to(np.eye(d), (k, d, d)).copy()
    if kind in ("psi", "xi"):
        t = X[:, -1]
        if kind == "psi":
            f = np.exp(t)
            df = f
        else:
            sig = expit(t)
            f = h * sig
            df = f * (1.0 - sig)
            clipped = (f <= XI_FLOOR) | (f >= np.nextafter(h, 0.0))
            df = np.where(clipped, 0.0, df)
        J = np.zeros((k, d, d))
        J[:, idx, idx] = f[:, None]
        J[:, :-1, -1] = X[:, :-1] * df[:, None]
        J[:, -1, -1] = df
        return J
    if kind == "exp_origin":
        return _exp_origin_jacobian(X, h)
    if kind == "pseudopolar":
        direction, t = X[:, :-1], X[:, -1]
        norm = np.linalg.norm(direction, axis=1)
        if np.any(norm == 0.0):
            raise ValueError("pseudopolar Jacobian is undefined for a zero direction")
        unit = direction / norm[:, None]
        J = np.zeros((k, d, d))
        proj = np.eye(d - 1)[None] - unit[:, :, None] * unit[:, None, :]
        J[:, :-1, :-1] = proj * (np.sinh(t) / norm)[:, None, None]
        J[:, :-1, -1] = unit * np.cosh(t)[:, None]
        J[:, -1, -1] = np.sinh(t)
        return J
    raise ValueError(f"unknown projection {kind!r}")


def projection_jacobian(x, map_kind: str, h: float = 1.0) -> np.ndarray:
    """Jacobian (``d_point x d``) of ``psi``, ``xi``, ``exp_origin`` or ``pseudopolar`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return projection_jacobian_array(x[None, :], map_kind, h)[0]


def euclidean_pair_grads(X, Y, config: KernelConfig):
    """Logits of ``(project(X[i]), project(Y[i]))`` and gradients w.r.t. X and Y.

    Returns ``(logits, grad_X, grad_Y, gap)``; ``gap`` includes the
    distance of ``exp_origin`` heights to their clamp.
    """
    kind = config.resolved_projection
    h = config.light_height
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    P, Q = project_array(X, kind, h), project_array(Y, kind, h)
    logits, gP, gQ, gap = pair_logit_grads(P, Q, config)
    gX = np.einsum("ki,kij->kj", gP, projection_jacobian_array(X, kind, h))
    gY = np.einsum("ki,kij->kj", gQ, projection_jacobian_array(Y, kind, h))
    if kind == "exp_origin":
        cap = h * (1.0 - EXP_CLAMP_EPS)
        for Z in (X, Y):
            _, raw = _exp_map_arrays(np.zeros(Z.shape[1] - 1), 1.0, Z)
            gap = np.minimum(gap, np.abs(raw - cap))
    return logits, gX, gY, gap


def finite_diff_check(
    fn: Callable[[np.ndarray], float],
    point,
    analytic,
    step: float = 1e-6,
) -> float:
    """Worst relative error of ``analytic`` against central differences of ``fn``.

    ``analytic`` is the gradient at ``point`` (or a callable returning it).
    The error of each coordinate is scaled by the largest gradient entry,
    so near-zero components do not blow up the ratio.
    """
    point = np.array(point, dtype=np.float64)
    if callable(analytic):
        analytic = analytic(point)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(point.shape)
    numeric = np.empty_like(point)
    flat, out = point.reshape(-1), numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        # Use the steps actually taken after rounding x +- step.
        flat[i] = orig + step
        up = flat[i] - orig
        f_plus = fn(point)
        flat[i] = orig - step
        down = orig - flat[i]
        f_minus = fn(point)
        flat[i] = orig
        out[i] = (f_plus - f_minus) / (up + down)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def gradient_check(config: KernelConfig, samples: int, seed: int, dim: int = 3, step: float = 1e-6) -> float:
    """Worst finite-difference error of :func:`euclidean_pair_grads` over smooth samples.

    Draws Euclidean pairs from ``seed``, keeps the first ``samples`` whose
    distance to every kink is at least ``SMOOTH_GAP`` and checks the
    gradient with respect to both inputs.
    """
    rng = np.random.default_rng(seed)
    worst, found = 0.0, 0
    while found < samples:
        X = 0.7 * rng.standard_normal((4 * samples, dim))
        Y = 0.7 * rng.standard_normal((4 * samples, dim))
        _, gX, gY, gap = euclidean_pair_grads(X, Y, config)
        for k in np.flatnonzero(gap >= SMOOTH_GAP):
            if found == samples:
                break
            xy = np.concatenate([X[k], Y[k]])

            def fn(z):
                return float(euclidean_pair_grads(z[None, :dim], z[None, dim:], config)[0][0])

            worst = max(worst, finite_diff_check(fn, xy, np.concatenate([gX[k], gY[k]]), step))
            found += 1
    return worst
