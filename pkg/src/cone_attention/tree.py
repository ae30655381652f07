"""Rooted trees stored as parent arrays, plus the plain-text tree format.

Tree files hold one ``node_id parent_id`` pair per line; the root has
parent ``-1``. Blank lines and ``#`` comments are ignored. Node ids must be
exactly ``0 .. n-1`` in some order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TreeSpec", "generate_tree", "read_tree", "write_tree", "complete_binary_size"]

TREE_KINDS = ("complete_binary", "random_attachment")


@dataclass(frozen=True)
class TreeSpec:
    """A rooted tree given by ``parent[i]`` (``-1`` for the root)."""

    parent: np.ndarray
    depth: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        parent = np.array(self.parent, dtype=np.int64)
        if parent.ndim != 1 or parent.size == 0:
            raise ValueError("a tree needs at least one node")
        n = parent.size
        roots = np.flatnonzero(parent < 0)
        if roots.size != 1:
            raise ValueError(f"expected exactly one root, found {roots.size}")
        if np.any(parent >= n) or np.any((parent < 0) & (parent != -1)):
            raise ValueError("parent ids out of range")
        depth = np.full(n, -1, dtype=np.int64)
        depth[roots[0]] = 0
        for start in range(n):
            path = []
            node = start
            while depth[node] < 0:
                path.append(node)
                node = parent[node]
                if len(path) > n:
                    raise ValueError("parent array contains a cycle")
            base = depth[node]
            for k, p in enumerate(reversed(path), start=1):
                depth[p] = base + k
        parent.flags.writeable = False
        depth.flags.writeable = False
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "depth", depth)

    @property
    def size(self) -> int:
        return self.parent.size

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parent < 0)[0])

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.size)]
        for node, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(node)
        return kids

    def leaves(self) -> np.ndarray:
        has_child = np.zeros(self.size, dtype=bool)
        has_child[self.parent[self.parent >= 0]] = True
        return np.flatnonzero(~has_child)

    def check_node(self, node) -> int:
        if int(node) != node or not 0 <= node < self.size:
            raise ValueError(f"invalid node id {node!r} for a tree of {self.size} nodes")
        return int(node)


def complete_binary_size(depth: int) -> int:
    """Number of nodes of a complete binary tree whose leaves sit at ``depth``."""
    return 2 ** (depth + 1) - 1


def generate_tree(kind: str, size: int, seed: int = 0) -> TreeSpec:
    """Build a tree with ``size`` nodes.

    ``complete_binary`` uses heap order (node ``i`` has parent
    ``(i - 1) // 2``); ``random_attachment`` attaches node ``i`` to a
    uniformly chosen earlier node. The seed only matters for the latter.
    """
    if size < 1:
        raise ValueError("tree size must be at least 1")
    if kind == "complete_binary":
        parent = (np.arange(size) - 1) // 2
        parent[0] = -1
    elif kind == "random_attachment":
        rng = np.random.default_rng(seed)
        parent = np.empty(size, dtype=np.int64)
        parent[0] = -1
        for i in range(1, size):
            parent[i] = rng.integers(0, i)
    else:
        raise ValueError(f"unknown tree kind {kind!r}; expected one of {TREE_KINDS}")
    return TreeSpec(parent)


def read_tree(path) -> TreeSpec:
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node_id parent_id'")
            try:
                node, parent = int(fields[0]), int(fields[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: node ids must be integers") from None
            if node in pairs:
                raise ValueError(f"{path}:{lineno}: duplicate node {node}")
            pairs[node] = parent
    n = len(pairs)
    if sorted(pairs) != list(range(n)):
        raise ValueError(f"{path}: node ids must be 0..{n - 1}")
    return TreeSpec(np.array([pairs[i] for i in range(n)]))


def write_tree(tree: TreeSpec, path) -> None:
    with open(path, "w") as fh:
        for node, parent in enumerate(tree.parent):
            fh.write(f"{node} {parent}\n")
