"""Compiled inner loops for tree construction and monotone subsequences.

Everything here works on plain integer/float arrays so it can be called from
worker threads without holding the GIL.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def link_parents(ranks, groups):
    """Parent and side of every element of a sequence inserted into a BST.

    ``ranks[i]`` is the rank of the i-th inserted label among all labels.
    ``groups[r]`` is the group id of the label of rank ``r``; labels of
    different groups never see each other, which builds a forest of
    independent BSTs in one pass (groups must be contiguous in rank order).

    The parent of element i is whichever of its in-order predecessor and
    successor among elements ``0..i-1`` was inserted last.  Those neighbours
    are found by deleting elements from a doubly linked list over rank order
    in reverse insertion order.
    """
    n = ranks.shape[0]
    at_rank = np.empty(n, np.int64)
    for i in range(n):
        at_rank[ranks[i]] = i
    prev = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    for r in range(n):
        prev[r] = r - 1
        nxt[r] = r + 1
        if r > 0 and groups[r - 1] != groups[r]:
            prev[r] = -1
        if r < n - 1 and groups[r + 1] != groups[r]:
            nxt[r] = n
    parent = np.full(n, -1, np.int64)
    is_right = np.zeros(n, np.bool_)
    for i in range(n - 1, -1, -1):
        r = ranks[i]
        p = prev[r]
        s = nxt[r]
        pi = at_rank[p] if p >= 0 else -1
        si = at_rank[s] if s < n else -1
        if pi > si:
            parent[i] = pi
            is_right[i] = True
        elif si >= 0:
            parent[i] = si
        if p >= 0:
            nxt[p] = s
        if s < n:
            prev[s] = p
    return parent, is_right


@njit(cache=True, nogil=True)
def children_and_depth(parent, is_right):
    n = parent.shape[0]
    left = np.full(n, -1, np.int64)
    right = np.full(n, -1, np.int64)
    depth = np.zeros(n, np.int64)
    for i in range(n):
        p = parent[i]
        if p >= 0:
            depth[i] = depth[p] + 1
            if is_right[i]:
                right[p] = i
            else:
                left[p] = i
    return left, right, depth


@njit(cache=True, nogil=True)
def subtree_sizes(parent):
    # children are always inserted after their parent
    n = parent.shape[0]
    size = np.ones(n, np.int64)
    for i in range(n - 1, 0, -1):
        p = parent[i]
        if p >= 0:
            size[p] += size[i]
    return size


@njit(cache=True, nogil=True)
def deepest_below(parent, depth):
    n = parent.shape[0]
    best = depth.copy()
    for i in range(n - 1, 0, -1):
        p = parent[i]
        if p >= 0 and best[i] > best[p]:
            best[p] = best[i]
    return best


@njit(cache=True, nogil=True)
def lis_length(values):
    """Patience sorting with strictly increasing pile tops."""
    n = values.shape[0]
    tops = np.empty(n, values.dtype)
    piles = 0
    for i in range(n):
        v = values[i]
        lo = 0
        hi = piles
        while lo < hi:
            mid = (lo + hi) >> 1
            if tops[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        tops[lo] = v
        if lo == piles:
            piles += 1
    return piles


@njit(cache=True, nogil=True)
def fill_heap(labels, slots, max_depth):
    """Insert labels into a heap-indexed BST truncated at ``max_depth``.

    ``slots`` has ``2**(max_depth+1) - 1`` entries, NaN meaning empty; word
    ``b1..bk`` lives at index ``(1b1..bk)_2 - 1``.  Labels that would land
    below ``max_depth`` are discarded.  Returns the number of labels consumed
    and the number of newly filled slots; stops as soon as every slot is full.
    """
    total = slots.shape[0]
    filled = 0
    for i in range(total):
        if not np.isnan(slots[i]):
            filled += 1
    used = 0
    for k in range(labels.shape[0]):
        if filled == total:
            break
        y = labels[k]
        used += 1
        idx = 0
        d = 0
        while True:
            s = slots[idx]
            if np.isnan(s):
                slots[idx] = y
                filled += 1
                break
            if d == max_depth:
                break
            if y < s:
                idx = 2 * idx + 1
            else:
                idx = 2 * idx + 2
            d += 1
    return used, filled
