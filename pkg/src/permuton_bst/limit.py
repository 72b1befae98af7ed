"""Subtree-size limit objects.

The limit of the descendant fractions is the random function
``psi(v) = right_flank(v) - left_flank(v)`` of the infinite BST built from
i.i.d. labels with law ``mu0``.  ``psi`` on every word of length ``<= depth``
only needs the labels of the words of length ``< depth``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import _kernels
from .distributions import Distribution1D

__all__ = [
    "MAX_DEPTH",
    "INSERTION_BUDGET",
    "PartialSampleError",
    "PsiSample",
    "BranchSample",
    "words_up_to",
    "psi_from_labels",
    "sample_psi",
    "sample_branch",
    "branch_prefix_frequencies",
]

MAX_DEPTH = 24
INSERTION_BUDGET = 10**7


def words_up_to(depth: int) -> list[str]:
    """All binary words of length ``0..depth`` in breadth-first order."""
    out = [""]
    for d in range(1, depth + 1):
        out.extend("".join(bits) for bits in product("01", repeat=d))
    return out


def _heap_index(word: str) -> int:
    return int("1" + word, 2) - 1


@dataclass(frozen=True)
class PsiSample:
    depth: int
    values: dict
    insertions_used: int
    labels: dict = field(default_factory=dict)
    unresolved: tuple = ()

    @property
    def complete(self) -> bool:
        return not self.unresolved

    def additivity_violations(self, tol: float = 4 * np.finfo(float).eps) -> int:
        bad = 0
        for w, v in self.values.items():
            if len(w) < self.depth and w + "0" in self.values and w + "1" in self.values:
                if abs(v - (self.values[w + "0"] + self.values[w + "1"])) > tol:
                    bad += 1
        return bad

    def to_text(self) -> str:
        return "".join(f"{w}\t{self.values[w]!r}\n" for w in words_up_to(self.depth) if w in self.values)


class PartialSampleError(RuntimeError):
    def __init__(self, partial: PsiSample):
        self.partial = partial
        shown = ", ".join(repr(w) for w in partial.unresolved[:8])
        more = "" if len(partial.unresolved) <= 8 else ", ..."
        super().__init__(
            f"insertion budget exhausted after {partial.insertions_used} labels; "
            f"unresolved words: {shown}{more}"
        )


def _psi_from_heap(slots: np.ndarray, depth: int, used: int) -> PsiSample:
    """Flank bookkeeping over a heap holding labels of words shorter than ``depth``."""
    values, labels, unresolved = {}, {}, []
    flanks = {"": (0.0, 1.0)}
    for w in words_up_to(depth):
        if w not in flanks:
            unresolved.append(w)
            continue
        lo, hi = flanks[w]
        values[w] = hi - lo
        if len(w) < depth:
            lab = slots[_heap_index(w)]
            if np.isnan(lab):
                continue
            labels[w] = float(lab)
            flanks[w + "0"] = (lo, float(lab))
            flanks[w + "1"] = (float(lab), hi)
    return PsiSample(depth, values, used, labels, tuple(unresolved))


def _check_depth(depth: int) -> None:
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}]")


def psi_from_labels(labels, depth: int) -> PsiSample:
    """``psi`` on words up to ``depth`` from an explicit finite label sequence.

    Words whose flanks are not determined by the given labels are reported
    in ``unresolved``.
    """
    _check_depth(depth)
    slots = np.full(2**depth - 1 if depth else 0, np.nan)
    used = 0
    if depth:
        used, _ = _kernels.fill_heap(np.asarray(labels, dtype=float), slots, depth - 1)
    return _psi_from_heap(slots, depth, int(used))


def sample_psi(mu0: Distribution1D, depth: int, rng: np.random.Generator,
               budget: int = INSERTION_BUDGET, method: str = "insertion") -> PsiSample:
    """Random ``psi`` on all words up to ``depth``.

    ``method="insertion"`` draws i.i.d. labels from ``mu0`` and inserts them
    until every word shorter than ``depth`` holds a label (raising
    :class:`PartialSampleError` past ``budget``).  ``method="conditional"``
    draws each node's label directly from ``mu0`` restricted to the node's
    flank interval, which has the same law and needs one draw per node.
    """
    if not mu0.atomless:
        raise ValueError("mu0 has atoms; the infinite BST is ill-defined")
    _check_depth(depth)
    size = 2**depth - 1 if depth else 0
    slots = np.full(size, np.nan)
    if method == "conditional":
        lo = np.zeros(1)
        hi = np.ones(1)
        for d in range(depth):
            lab = np.asarray(mu0.sample_conditional(lo, hi, rng), dtype=float)
            slots[2**d - 1: 2**(d + 1) - 1] = lab
            lo = np.stack([lo, lab], axis=1).ravel()
            hi = np.stack([lab, hi], axis=1).ravel()
        return _psi_from_heap(slots, depth, size)
    if method != "insertion":
        raise ValueError(f"unknown method {method!r}")
    used = 0
    filled = 0
    # about 2**depth * depth draws fill a uniform heap; grow batches geometrically
    chunk = 4 * size + 8
    while filled < size:
        if used >= budget:
            raise PartialSampleError(_psi_from_heap(slots, depth, used))
        batch = np.asarray(mu0.sample(rng, min(chunk, budget - used)), dtype=float)
        k, filled = _kernels.fill_heap(batch, slots, depth - 1)
        used += int(k)
        chunk = min(2 * chunk, 1 << 20)
    return _psi_from_heap(slots, depth, used)


@dataclass(frozen=True)
class BranchSample:
    word: str
    intervals: np.ndarray  # (depth + 1, 2); row k is (a_k, b_k)


def sample_branch(mu0: Distribution1D, depth: int, rng: np.random.Generator) -> BranchSample:
    """Word of the branch followed by an independent uniform key, built lazily.

    At each step a label is drawn from ``mu0`` restricted to the current
    interval and the key goes left with probability proportional to the
    part of the interval below the label.
    """
    if not mu0.atomless:
        raise ValueError("mu0 has atoms")
    a, b = 0.0, 1.0
    bits = []
    iv = [(a, b)]
    for _ in range(depth):
        y = float(mu0.sample_conditional(a, b, rng))
        if rng.random() * (b - a) < y - a:
            bits.append("0")
            b = y
        else:
            bits.append("1")
            a = y
        iv.append((a, b))
    return BranchSample("".join(bits), np.array(iv))


def branch_prefix_frequencies(mu0: Distribution1D, depth: int, count: int, rng: np.random.Generator) -> dict:
    """Empirical frequency of every prefix of length ``<= depth`` over ``count``
    branch samples (vectorised over samples)."""
    if not mu0.atomless:
        raise ValueError("mu0 has atoms")
    a = np.zeros(count)
    b = np.ones(count)
    codes = np.zeros(count, np.int64)
    freq = {"": 1.0}
    for d in range(1, depth + 1):
        y = mu0.sample_conditional(a, b, rng)
        left = rng.random(count) * (b - a) < y - a
        b = np.where(left, y, b)
        a = np.where(left, a, y)
        codes = 2 * codes + (~left)
        counts = np.bincount(codes, minlength=2**d)
        for c in range(2**d):
            freq[format(c, f"0{d}b")] = counts[c] / count
    return freq
