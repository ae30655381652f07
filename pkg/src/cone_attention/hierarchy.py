"""Trees, cone-consistent tree embeddings and LCA ranking scores.

The constructive embedding places node ``k`` levels below the root at height
``root_height * rho**k``. Each level moves children along its own horizontal
axis, and the step size shrinks fast enough that two leaves whose lowest
common ancestor is deeper always end up horizontally closer. With every leaf
at the same height, a smaller horizontal gap means a lower sup, and so a
larger cone logit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.stats import spearmanr

from .attention import _block_logits
from .geometry import HalfSpacePoint, penumbral_margin, umbral_margin
from .gradients import euclidean_pair_grads
from .kernels import CONE_KINDS, KernelConfig
from .projections import project_array
from .tree import TreeSpec, complete_binary_size, generate_tree, read_tree, write_tree

__all__ = [
    "TreeSpec",
    "generate_tree",
    "read_tree",
    "write_tree",
    "complete_binary_size",
    "lca_depths",
    "embed_tree_cone_consistent",
    "RankScore",
    "lca_rank_score",
    "TrainResult",
    "train_toy",
    "compare_low_dimension",
]

RHO = 0.7
# Fraction of the available horizontal slack used by each child offset.
OFFSET_FRACTION = 0.5
MIN_MARGIN = 1e-6
RANK_MARGIN = 0.1


def lca_depths(tree: TreeSpec, a, b) -> np.ndarray:
    """Vectorised LCA depth of node pairs ``(a[i], b[i])``."""
    a = np.array(a, dtype=np.int64).reshape(-1)
    b = np.array(b, dtype=np.int64).reshape(-1)
    if np.any((a < 0) | (a >= tree.size) | (b < 0) | (b >= tree.size)):
        raise ValueError("node ids out of range")
    depth, parent = tree.depth, tree.parent
    while True:
        up_a = depth[a] > depth[b]
        up_b = depth[b] > depth[a]
        if not (up_a.any() or up_b.any()):
            break
        a = np.where(up_a, parent[a], a)
        b = np.where(up_b, parent[b], b)
    while np.any(a != b):
        differ = a != b
        a = np.where(differ, parent[a], a)
        b = np.where(differ, parent[b], b)
    return depth[a]


# --- constructive embedding ---------------------------------------------------


def _root_height(config: KernelConfig) -> float:
    return 0.9 * config.light_height if config.kind == "penumbral" else 1.0


def _child_offset(config: KernelConfig, parent_height, child_height) -> float:
    if config.kind == "umbral":
        # hc <= hp - delta / sinh(r)  <=>  delta <= (hp - hc) sinh(r)
        slack = (parent_height - child_height) * np.sinh(config.ball_radius)
    else:
        h = config.light_height
        slack = np.sqrt(h * h - child_height**2) - np.sqrt(h * h - parent_height**2)
    return OFFSET_FRACTION * slack


def _edge_margin(config: KernelConfig, delta, parent_height, child_height) -> float:
    if config.kind == "umbral":
        return float(umbral_margin(delta, parent_height, child_height, config.ball_radius))
    return float(penumbral_margin(delta, parent_height, child_height, config.light_height))


def embed_tree_cone_consistent(tree: TreeSpec, config: KernelConfig, dim: int | None = None) -> list[HalfSpacePoint]:
    """Place every node so that it lies inside its parent's cone.

    ``dim`` is the number of horizontal coordinates; it defaults to the
    tree height, which gives every level its own axis. With fewer axes the
    levels share them cyclically: membership still holds, the ranking
    guarantee may not.
    """
    if config.kind not in CONE_KINDS:
        raise ValueError(f"constructive embedding needs a cone kernel, got {config.kind!r}")
    max_depth = int(tree.depth.max())
    dim = max(1, max_depth) if dim is None else int(dim)
    if dim < 1:
        raise ValueError("need at least one horizontal dimension")

    heights = _root_height(config) * RHO ** tree.depth.astype(np.float64)
    horizontal = np.zeros((tree.size, dim))
    kids = tree.children()
    order = [tree.root]
    for node in order:
        children = kids[node]
        order.extend(children)
        if not children:
            continue
        level = int(tree.depth[node])
        hp, hc = heights[node], heights[children[0]]
        offset = _child_offset(config, hp, hc)
        if len(children) == 1:
            spots = np.zeros(1)
        else:
            spots = np.linspace(-1.0, 1.0, len(children))
        for child, s in zip(children, spots):
            horizontal[child] = horizontal[node]
            horizontal[child, level % dim] += s * offset
            margin = _edge_margin(config, abs(s) * offset, hp, hc)
            if not margin >= MIN_MARGIN:
                raise ValueError(f"cannot place node {child}: membership margin {margin:.3g} < {MIN_MARGIN:g}")
    return [HalfSpacePoint(horizontal[i], heights[i]) for i in range(tree.size)]


# --- ranking ------------------------------------------------------------------


class RankScore(NamedTuple):
    triple_agreement: float
    spearman: float
    triples: int
    vacuous: bool


def _coords(embeddings) -> np.ndarray:
    if len(embeddings) and isinstance(embeddings[0], HalfSpacePoint):
        return np.stack([p.coords for p in embeddings])
    return np.atleast_2d(np.asarray(embeddings, dtype=np.float64))


def _leaf_triples(tree: TreeSpec, leaves, max_triples, rng):
    """Index triples into ``leaves`` with lca(a, b) deeper than lca(a, c)."""
    k = leaves.size
    if k < 3:
        return np.empty((0, 3), dtype=np.int64)
    if k * (k - 1) * (k - 2) <= max_triples:
        a, b, c = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
        cand = np.stack([a.ravel(), b.ravel(), c.ravel()], axis=1)
    else:
        cand = rng.integers(0, k, size=(4 * max_triples, 3))
    distinct = (cand[:, 0] != cand[:, 1]) & (cand[:, 0] != cand[:, 2]) & (cand[:, 1] != cand[:, 2])
    cand = cand[distinct]
    ab = lca_depths(tree, leaves[cand[:, 0]], leaves[cand[:, 1]])
    ac = lca_depths(tree, leaves[cand[:, 0]], leaves[cand[:, 2]])
    return cand[ab > ac][:max_triples]


def lca_rank_score(embeddings, tree: TreeSpec, config: KernelConfig, max_triples: int = 100_000, seed: int = 0) -> RankScore:
    """How well logits order leaf pairs by the depth of their LCA.

    ``embeddings`` are points already in the kernel's space (half-space
    coordinates for cone kernels), one per node. Triple agreement is the
    fraction of leaf triples ``(a, b, c)`` with a deeper ``lca(a, b)`` where
    ``logit(a, b) > logit(a, c)``; exact ties count one half. All triples
    are used when there are at most ``max_triples`` ordered candidates,
    otherwise ``max_triples`` are sampled. Spearman correlation is taken
    between logits and LCA depth over unordered leaf pairs (NaN when fewer
    than two pairs or either side is constant).
    """
    points = _coords(embeddings)
    if points.shape[0] != tree.size:
        raise ValueError(f"{points.shape[0]} embeddings for {tree.size} nodes")
    leaves = tree.leaves()
    logits = _block_logits(points[leaves], points[leaves], config)

    triples = _leaf_triples(tree, leaves, max_triples, np.random.default_rng(seed))
    if triples.shape[0] == 0:
        agreement, vacuous = 1.0, True
    else:
        near = logits[triples[:, 0], triples[:, 1]]
        far = logits[triples[:, 0], triples[:, 2]]
        agreement = float(np.mean((near > far) + 0.5 * (near == far)))
        vacuous = False

    i, j = np.triu_indices(leaves.size, k=1)
    rho = np.nan
    if i.size >= 2:
        depths = lca_depths(tree, leaves[i], leaves[j])
        pair_logits = logits[i, j]
        if np.ptp(depths) > 0 and np.ptp(pair_logits) > 0:
            rho = float(spearmanr(pair_logits, depths)[0])
    return RankScore(agreement, rho, int(triples.shape[0]), vacuous)


# --- toy training -------------------------------------------------------------


class TrainResult(NamedTuple):
    params: np.ndarray
    points: np.ndarray
    loss_curve: np.ndarray
    scores: RankScore


def _node_triples(tree: TreeSpec, max_triples, rng):
    n = tree.size
    cand = rng.integers(0, n, size=(8 * max_triples, 3))
    ok = (cand[:, 0] != cand[:, 1]) & (cand[:, 0] != cand[:, 2])
    cand = cand[ok]
    ab = lca_depths(tree, cand[:, 0], cand[:, 1])
    ac = lca_depths(tree, cand[:, 0], cand[:, 2])
    return cand[ab > ac][:max_triples]


def _ranking_loss(X, triples, config: KernelConfig):
    a, b, c = triples.T
    with np.errstate(over="ignore", invalid="ignore"):
        l_ab, ga_ab, gb_ab, _ = euclidean_pair_grads(X[a], X[b], config)
        l_ac, ga_ac, gc_ac, _ = euclidean_pair_grads(X[a], X[c], config)
        hinge = RANK_MARGIN + l_ac - l_ab
    active = (hinge > 0.0).astype(np.float64)[:, None] / triples.shape[0]
    grad = np.zeros_like(X)
    np.add.at(grad, a, active * (ga_ac - ga_ab))
    np.add.at(grad, b, -active * gb_ab)
    np.add.at(grad, c, active * gc_ac)
    return float(np.mean(np.maximum(hinge, 0.0))), grad


def train_toy(
    tree: TreeSpec,
    config: KernelConfig,
    steps: int,
    learning_rate: float,
    seed: int,
    dim: int = 3,
    max_triples: int = 4096,
    init_scale: float = 0.5,
) -> TrainResult:
    """Full-batch gradient descent on a margin ranking loss over node triples.

    Each node gets a Euclidean vector of length ``dim``; a fixed set of up
    to ``max_triples`` triples ``(a, b, c)`` with ``lca(a, b)`` deeper than
    ``lca(a, c)`` is drawn once from ``seed``. The loss is
    ``mean(max(0, 0.1 + logit(a, c) - logit(a, b)))``. ``loss_curve[t]`` is
    the loss before step ``t`` (so it has ``steps + 1`` entries).
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    rng = np.random.default_rng(seed)
    X = init_scale * rng.standard_normal((tree.size, dim))
    triples = _node_triples(tree, max_triples, rng)
    curve = np.empty(steps + 1)
    if triples.shape[0] == 0:
        curve[:] = 0.0
    else:
        for t in range(steps + 1):
            loss, grad = _ranking_loss(X, triples, config)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise FloatingPointError(f"training diverged at step {t}")
            curve[t] = loss
            if t < steps:
                X = X - learning_rate * grad
    points = project_array(X, config.resolved_projection, config.light_height)
    return TrainResult(X, points, curve, lca_rank_score(points, tree, config))


def compare_low_dimension(
    tree: TreeSpec,
    kinds=("penumbral", "umbral", "dot"),
    dim: int = 4,
    steps: int = 3000,
    learning_rate: float = 3.0,
    seeds=(0, 1),
) -> dict[str, np.ndarray]:
    """Leaf triple agreement after toy training, per kernel kind and seed."""
    table = {}
    for kind in kinds:
        config = KernelConfig(kind=kind)
        table[kind] = np.array(
            [train_toy(tree, config, steps, learning_rate, s, dim=dim).scores.triple_agreement for s in seeds]
        )
    return table
