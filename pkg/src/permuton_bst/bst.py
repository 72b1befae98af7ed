"""Binary search trees built from label sequences and planar point sets.

Nodes are addressed by binary words: ``""`` is the root and appending ``"0"``
(resp. ``"1"``) moves to the left (resp. right) child.  Trees are stored as
parallel arrays indexed by insertion order, so node 0 is the root and every
parent precedes its children.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "DuplicateLabelError",
    "PointSet",
    "LabeledBst",
    "Decomposition",
    "insert",
    "bst_from_sequence",
    "permutation_from_points",
    "bst_from_points",
    "height",
    "points_height",
    "sequence_depths",
    "subtree_fraction",
    "flank_labels",
    "is_ancestor_by_condition",
    "maximal_chain",
    "maximal_chain_indices",
    "is_chain",
    "decompose",
    "read_points",
    "write_points",
]


class DuplicateLabelError(ValueError):
    pass


def _check_word(word: str) -> str:
    if any(c not in "01" for c in word):
        raise ValueError(f"node word must be over {{0,1}}, got {word!r}")
    return word


def _ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), np.int64)
    ranks[order] = np.arange(len(values))
    return ranks


def _has_duplicates(values: np.ndarray) -> bool:
    if len(values) < 2:
        return False
    s = np.sort(values)
    return bool(np.any(s[1:] == s[:-1]))


class PointSet:
    """Finite planar point set with pairwise distinct x's and distinct y's."""

    __slots__ = ("x", "y", "_x_order")

    def __init__(self, x, y=None):
        if y is None:
            arr = np.asarray(x, dtype=float).reshape(-1, 2)
            x, y = arr[:, 0], arr[:, 1]
        x = np.array(x, dtype=float).ravel()
        y = np.array(y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if len(xs) > 1 and np.any(xs[1:] == xs[:-1]):
            raise DuplicateLabelError("x-coordinates are not pairwise distinct")
        if _has_duplicates(y):
            raise DuplicateLabelError("y-coordinates are not pairwise distinct")
        x.setflags(write=False)
        y.setflags(write=False)
        order.setflags(write=False)
        self.x = x
        self.y = y
        self._x_order = order

    def __len__(self) -> int:
        return len(self.x)

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)})"

    def __iter__(self):
        return iter(zip(self.x.tolist(), self.y.tolist()))

    @property
    def x_order(self) -> np.ndarray:
        """Point indices sorted by increasing x."""
        return self._x_order

    def y_sequence(self) -> np.ndarray:
        """y-coordinates read by increasing x (the BST insertion order)."""
        return self.y[self._x_order]

    def subset(self, indices) -> "PointSet":
        idx = np.asarray(indices, dtype=np.int64)
        return PointSet(self.x[idx], self.y[idx])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])


@dataclass(frozen=True, eq=False)
class LabeledBst:
    """BST as insertion-ordered arrays; ``-1`` marks a missing node."""

    labels: np.ndarray
    parent: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray

    @classmethod
    def empty(cls) -> "LabeledBst":
        e = np.empty(0, np.int64)
        return cls(np.empty(0, float), e, e, e, e)

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def height(self) -> int:
        return int(self.depth.max()) if self.size else -1

    @cached_property
    def subtree_sizes(self) -> np.ndarray:
        return _kernels.subtree_sizes(self.parent)

    def node(self, word: str) -> int | None:
        """Insertion index of the node at ``word``, or None if absent."""
        if self.size == 0:
            return None
        i = 0
        for bit in _check_word(word):
            i = self.left[i] if bit == "0" else self.right[i]
            if i < 0:
                return None
        return int(i)

    def label(self, word: str) -> float:
        i = self.node(word)
        if i is None:
            raise KeyError(word)
        return float(self.labels[i])

    def word(self, index: int) -> str:
        bits = []
        i = int(index)
        while self.parent[i] >= 0:
            p = self.parent[i]
            bits.append("1" if self.right[p] == i else "0")
            i = p
        return "".join(reversed(bits))

    def is_ancestor(self, a: int, b: int) -> bool:
        """True if node ``a`` is a (non-strict) ancestor of node ``b``."""
        da = self.depth[a]
        while self.depth[b] > da:
            b = self.parent[b]
        return bool(b == a)

    def items(self) -> list[tuple[str, float]]:
        """(word, label) pairs in preorder."""
        out = []
        if self.size == 0:
            return out
        stack = [(0, "")]
        while stack:
            i, w = stack.pop()
            out.append((w, float(self.labels[i])))
            if self.right[i] >= 0:
                stack.append((int(self.right[i]), w + "1"))
            if self.left[i] >= 0:
                stack.append((int(self.left[i]), w + "0"))
        return out

    def words(self) -> list[str]:
        return [w for w, _ in self.items()]

    def shape(self) -> tuple[str, ...]:
        """Unlabelled shape as the sorted tuple of node words."""
        return tuple(sorted(self.words()))

    def to_text(self) -> str:
        return "".join(f"{w}\t{lab!r}\n" for w, lab in self.items())

    @classmethod
    def from_text(cls, text: str) -> "LabeledBst":
        pairs = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            w, lab = line.split("\t")
            pairs.append((_check_word(w.strip()), float(lab)))
        # preorder puts every parent before its children, so depth order is
        # a valid insertion order
        pairs.sort(key=lambda p: len(p[0]))
        tree = bst_from_sequence([lab for _, lab in pairs])
        for w, lab in pairs:
            if tree.node(w) is None or tree.label(w) != lab:
                raise ValueError(f"text does not describe a BST (node {w!r})")
        return tree


def _from_parents(labels: np.ndarray, parent: np.ndarray, is_right: np.ndarray) -> LabeledBst:
    left, right, depth = _kernels.children_and_depth(parent, is_right)
    for a in (labels, parent, left, right, depth):
        a.setflags(write=False)
    return LabeledBst(labels, parent, left, right, depth)


def insert(tree: LabeledBst, label: float) -> LabeledBst:
    """Return the unique BST extending ``tree`` by one node labelled ``label``."""
    label = float(label)
    n = tree.size
    parent, side = -1, False
    if n:
        i = 0
        while True:
            cur = tree.labels[i]
            if label == cur:
                raise DuplicateLabelError(f"label {label!r} already in tree")
            nxt = tree.left[i] if label < cur else tree.right[i]
            if nxt < 0:
                parent, side = i, label > cur
                break
            i = nxt
    labels = np.append(tree.labels, label)
    par = np.append(tree.parent, parent)
    left = tree.left.copy()
    right = tree.right.copy()
    if parent >= 0:
        (right if side else left)[parent] = n
    left = np.append(left, -1)
    right = np.append(right, -1)
    depth = np.append(tree.depth, tree.depth[parent] + 1 if parent >= 0 else 0)
    for a in (labels, par, left, right, depth):
        a.setflags(write=False)
    return LabeledBst(labels, par, left, right, depth)


def bst_from_sequence(labels: Sequence[float] | np.ndarray) -> LabeledBst:
    """BST obtained by inserting ``labels`` one after the other."""
    y = np.array(labels, dtype=float).ravel()
    if _has_duplicates(y):
        raise DuplicateLabelError("labels are not pairwise distinct")
    if len(y) == 0:
        return LabeledBst.empty()
    parent, is_right = _kernels.link_parents(_ranks(y), np.zeros(len(y), np.int64))
    return _from_parents(y, parent, is_right)


def permutation_from_points(points: PointSet) -> np.ndarray:
    """Ranks (1-based) of the y-values read in increasing x order."""
    return _ranks(points.y_sequence()) + 1


def bst_from_points(points: PointSet) -> LabeledBst:
    return bst_from_sequence(points.y_sequence())


def height(tree: LabeledBst | PointSet) -> int:
    """Height of a tree (or of the BST of a point set); ``-1`` when empty."""
    if isinstance(tree, PointSet):
        return points_height(tree)
    return tree.height


def points_height(points: PointSet) -> int:
    if len(points) == 0:
        return -1
    y = points.y_sequence()
    parent, is_right = _kernels.link_parents(_ranks(y), np.zeros(len(y), np.int64))
    _, _, depth = _kernels.children_and_depth(parent, is_right)
    return int(depth.max())


def sequence_depths(y: np.ndarray, groups: np.ndarray | None = None) -> np.ndarray:
    """Depth of each element of ``y`` in its BST.

    With ``groups`` (one integer per element), elements sharing a group form
    their own BST, independent of the others.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        return np.empty(0, np.int64)
    if groups is None:
        ranks = _ranks(y)
        g_by_rank = np.zeros(n, np.int64)
    else:
        groups = np.asarray(groups, dtype=np.int64)
        order = np.lexsort((y, groups))
        ranks = np.empty(n, np.int64)
        ranks[order] = np.arange(n)
        g_by_rank = groups[order]
    parent, is_right = _kernels.link_parents(ranks, g_by_rank)
    return _kernels.children_and_depth(parent, is_right)[2]


def subtree_fraction(tree: LabeledBst, v: str) -> float:
    """Fraction of the nodes of ``tree`` lying in the subtree rooted at ``v``.

    Returns 0.0 when ``v`` is not a node of the tree.
    """
    if tree.size == 0:
        raise ValueError("subtree fraction of an empty tree is undefined")
    i = tree.node(v)
    if i is None:
        return 0.0
    return tree.subtree_sizes[i] / tree.size


def flank_labels(tree: LabeledBst, v: str, lo: float = 0.0, hi: float = 1.0) -> tuple[float, float]:
    """Labels of the nearest ancestors of ``v`` to its left and to its right.

    ``lo`` / ``hi`` stand in for missing flanks (all-zero / all-one words).
    ``v`` must be a node or a free child slot of an existing node.
    """
    _check_word(v)
    i = 0
    for k, bit in enumerate(v):
        if tree.size == 0 or i < 0:
            raise KeyError(f"ancestor {v[:k]!r} of {v!r} is not in the tree")
        lab = float(tree.labels[i])
        if bit == "0":
            hi = lab
            i = tree.left[i]
        else:
            lo = lab
            i = tree.right[i]
    return lo, hi


def is_ancestor_by_condition(seq: Sequence[float] | np.ndarray, i: int, j: int) -> bool:
    """Whether ``seq[i]`` is an ancestor of ``seq[j]`` in the BST of ``seq``.

    Uses 0-based indices with ``i < j``: the answer is yes exactly when no
    earlier ``seq[k]`` (``k < i``) lies strictly between the two values.
    """
    if not 0 <= i < j < len(seq):
        raise IndexError("need 0 <= i < j < len(seq)")
    s = np.asarray(seq, dtype=float)
    a, b = s[i], s[j]
    lo, hi = (a, b) if a < b else (b, a)
    earlier = s[:i]
    return not bool(np.any((earlier > lo) & (earlier < hi)))


def maximal_chain_indices(tree: LabeledBst) -> np.ndarray:
    """Insertion indices along a root-to-deepest-leaf path.

    Among equally deep leaves the lexicographically smallest word wins.
    """
    if tree.size == 0:
        raise ValueError("empty tree has no chain")
    best = _kernels.deepest_below(tree.parent, tree.depth)
    target = best[0]
    path = [0]
    i = 0
    while tree.depth[i] < target:
        lft = tree.left[i]
        i = lft if lft >= 0 and best[lft] == target else tree.right[i]
        path.append(int(i))
    return np.array(path, np.int64)


def maximal_chain(tree: LabeledBst) -> list[str]:
    idx = maximal_chain_indices(tree)
    path = tree.word(int(idx[-1]))
    return [path[:k] for k in range(len(path) + 1)]


def is_chain(points: PointSet, subset: Iterable[int]) -> bool:
    """Whether the given point indices are pairwise ancestor-related in the BST."""
    idx = np.unique(np.asarray(list(subset), dtype=np.int64))
    if len(idx) <= 1:
        return True
    if idx.min() < 0 or idx.max() >= len(points):
        raise IndexError("point index out of range")
    pos = np.empty(len(points), np.int64)
    pos[points.x_order] = np.arange(len(points))
    seq = points.y_sequence()
    ordered = np.sort(pos[idx])
    # ancestry is transitive and ancestors are inserted first, so checking
    # consecutive members in insertion order suffices
    for a, b in zip(ordered[:-1], ordered[1:]):
        if not is_ancestor_by_condition(seq, int(a), int(b)):
            return False
    return True


@dataclass(frozen=True)
class Decomposition:
    """Left band of a point set and the point sets hanging in its y-gaps."""

    beta: float
    top: PointSet
    gaps: np.ndarray  # (K+1, 2) interval endpoints
    hanging: list

    @property
    def k_beta(self) -> int:
        return len(self.top)

    @property
    def widths(self) -> np.ndarray:
        return self.gaps[:, 1] - self.gaps[:, 0]


def decompose(points: PointSet, beta: float) -> Decomposition:
    """Split ``points`` into the band ``x <= beta`` and per-gap hanging sets."""
    in_top = points.x <= beta
    top = PointSet(points.x[in_top], points.y[in_top])
    ty = np.sort(top.y)
    edges = np.concatenate([[0.0], ty, [1.0]])
    gaps = np.column_stack([edges[:-1], edges[1:]])
    rest = np.flatnonzero(~in_top)
    gap_of = np.searchsorted(ty, points.y[rest])
    order = np.argsort(gap_of, kind="stable")
    bounds = np.searchsorted(gap_of[order], np.arange(len(ty) + 2))
    hanging = []
    for k in range(len(ty) + 1):
        sel = rest[order[bounds[k]:bounds[k + 1]]]
        hanging.append(PointSet(points.x[sel], points.y[sel]))
    return Decomposition(float(beta), top, gaps, hanging)


def read_points(path) -> PointSet:
    """Read ``x<TAB>y`` lines; ``#`` starts a comment line."""
    xs, ys = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'x<TAB>y'")
            x, y = float(parts[0]), float(parts[1])
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ValueError(f"{path}:{lineno}: coordinates must lie in [0,1]")
            xs.append(x)
            ys.append(y)
    return PointSet(xs, ys)


def write_points(points: PointSet, path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for x, y in points:
            fh.write(f"{x!r}\t{y!r}\n")
