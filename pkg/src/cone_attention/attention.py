"""Batched attention with the kernels from :mod:`cone_attention.kernels`.

Queries and keys are Euclidean; each kernel first projects them (last
coordinate becomes the height) and then scores every pair. Work is split
into blocks of query rows whose size depends only on the input shapes, so
the output does not depend on how many threads process the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericRangeError
from .kernels import CONE_KINDS, KernelConfig, cone_height_reduced
from .projections import project_array

__all__ = [
    "AttentionBatch",
    "SimilarityMatrix",
    "pairwise_logits",
    "softmax_rows",
    "attend",
    "multi_head",
]

# Upper bound on the elements of one (rows, m, d) difference block.
BLOCK_ELEMENTS = 1 << 21


def _matrix(name, a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class AttentionBatch:
    """Queries ``(n, d)``, keys ``(m, d)``, values ``(m, dv)`` and an optional ``(n, m)`` mask.

    ``mask[i, j]`` true means query ``i`` may attend to key ``j``.
    """

    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        q = _matrix("queries", self.queries)
        k = _matrix("keys", self.keys)
        v = _matrix("values", self.values)
        if q.shape[0] < 1 or k.shape[0] < 1:
            raise ValueError("need at least one query and one key")
        if q.shape[1] != k.shape[1]:
            raise ValueError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
        if v.shape[0] != k.shape[0]:
            raise ValueError(f"{k.shape[0]} keys but {v.shape[0]} value rows")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask)
            if mask.dtype != bool:
                raise TypeError("mask must be boolean")
            if mask.shape != (q.shape[0], k.shape[0]):
                raise ValueError(f"mask shape {mask.shape} != {(q.shape[0], k.shape[0])}")
            empty = ~mask.any(axis=1)
            if np.any(empty):
                raise ValueError(f"mask row {int(np.flatnonzero(empty)[0])} attends to nothing")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", mask)

    @property
    def n(self) -> int:
        return self.queries.shape[0]

    @property
    def m(self) -> int:
        return self.keys.shape[0]

    @property
    def d(self) -> int:
        return self.queries.shape[1]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pre-softmax scores; ``-inf`` marks masked entries."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 2:
            raise ValueError("logits must be a 2-D matrix")
        if np.any(np.isnan(logits) | (logits == np.inf)):
            raise NumericRangeError("logits contain NaN or +inf")
        object.__setattr__(self, "logits", logits)


def _project(name, x, config: KernelConfig):
    try:
        return project_array(x, config.resolved_projection, config.light_height)
    except (ValueError, ArithmeticError) as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _check_light(name, points, h):
    bad = np.flatnonzero(points[:, -1] >= h)
    if bad.size:
        raise ValueError(f"{name} row {int(bad[0])} is at or above the light source (height >= {h!r})")


def _block_logits(P, K, config: KernelConfig):
    """Logits of every row of ``P`` against every row of ``K``."""
    kind = config.kind
    if kind in CONE_KINDS:
        delta = np.linalg.norm(P[:, None, :-1] - K[None, :, :-1], axis=-1)
        height = cone_height_reduced(delta, P[:, -1, None], K[None, :, -1], config)
        return -config.gamma * height
    if kind == "dist_halfspace":
        diff = P[:, None, :] - K[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        dist = 2.0 * np.arcsinh(np.sqrt(sq / (4.0 * P[:, -1, None] * K[None, :, -1])))
        return -config.beta * dist - config.c
    if kind == "dist_hyperboloid":
        diff = P[:, None, :] - K[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff[..., :-1], diff[..., :-1]) - diff[..., -1] ** 2
        return -config.beta * 2.0 * np.arcsinh(np.sqrt(np.maximum(sq, 0.0)) / 2.0) - config.c
    if kind == "laplacian":
        return -config.gamma * np.linalg.norm(P[:, None, :] - K[None, :, :], axis=-1)
    if kind == "dot":
        return np.einsum("ik,jk->ij", P, K) / np.sqrt(P.shape[1])
    raise ValueError(f"unknown kernel kind {kind!r}")


def _blocks(n, m, d):
    rows = max(1, BLOCK_ELEMENTS // max(1, m * d))
    return [(start, min(start + rows, n)) for start in range(0, n, rows)]


def _run_blocks(fn, blocks, threads):
    if threads < 1:
        raise ValueError("threads must be positive")
    if threads == 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def pairwise_logits(batch: AttentionBatch, config: KernelConfig, threads: int = 1) -> SimilarityMatrix:
    """Kernel logit of every (query, key) pair after projection."""
    kind = config.kind
    if kind not in ("laplacian", "dot") and batch.d < 2:
        raise ValueError(f"{kind} needs d >= 2 (one coordinate becomes the height)")
    P = _project("queries", batch.queries, config)
    K = _project("keys", batch.keys, config)
    if kind == "penumbral":
        _check_light("projected query", P, config.light_height)
        _check_light("projected key", K, config.light_height)

    def block(bounds):
        lo, hi = bounds
        with np.errstate(over="ignore", invalid="ignore"):
            return _block_logits(P[lo:hi], K, config)

    logits = np.concatenate(_run_blocks(block, _blocks(batch.n, batch.m, P.shape[1]), threads))
    bad = ~np.isfinite(logits)
    if np.any(bad):
        i, j = (int(t[0]) for t in np.nonzero(bad))
        raise NumericRangeError(f"non-finite logit at (query {i}, key {j})")
    if batch.mask is not None:
        logits[~batch.mask] = -np.inf
    return SimilarityMatrix(logits)


def softmax_rows(S) -> np.ndarray:
    """Row softmax with the row maximum subtracted first; ``-inf`` maps to 0."""
    logits = S.logits if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    logits = np.atleast_2d(logits)
    top = logits.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        row = int(np.flatnonzero(~np.isfinite(top[:, 0]))[0])
        raise ValueError(f"row {row} has no finite logit")
    weights = np.exp(logits - top)
    # Summing the sorted terms makes the normaliser independent of key order,
    # so permuting keys permutes the weights exactly.
    total = np.sort(weights, axis=1).sum(axis=1, keepdims=True)
    return weights / total


def _aggregate(weights, values):
    # Left to right over keys so every output entry has one fixed summation order.
    out = np.zeros((weights.shape[0], values.shape[1]))
    tmp = np.empty_like(out)
    for j in range(values.shape[0]):
        np.multiply(weights[:, j, None], values[j], out=tmp)
        out += tmp
    return out


def attend(batch: AttentionBatch, config: KernelConfig, threads: int = 1) -> np.ndarray:
    """``softmax_rows(pairwise_logits) @ values``, bit-identical for any ``threads``."""
    weights = softmax_rows(pairwise_logits(batch, config, threads))
    blocks = _blocks(batch.n, batch.m, batch.values.shape[1])
    parts = _run_blocks(lambda b: _aggregate(weights[b[0]:b[1]], batch.values), blocks, threads)
    return np.concatenate(parts)


def multi_head(batch: AttentionBatch, config: KernelConfig, heads: int, threads: int = 1) -> np.ndarray:
    """Split features into ``heads`` contiguous slices, attend per slice, concatenate."""
    if int(heads) != heads or heads < 1:
        raise ValueError("heads must be a positive integer")
    heads = int(heads)
    dv = batch.values.shape[1]
    if batch.d % heads or dv % heads:
        raise ValueError(f"d={batch.d} and dv={dv} must both be divisible by heads={heads}")
    dq, dh = batch.d // heads, dv // heads
    outs = []
    for k in range(heads):
        sub = AttentionBatch(
            batch.queries[:, k * dq:(k + 1) * dq],
            batch.keys[:, k * dq:(k + 1) * dq],
            batch.values[:, k * dh:(k + 1) * dh],
            batch.mask,
        )
        outs.append(attend(sub, config, threads))
    return np.concatenate(outs, axis=1)
