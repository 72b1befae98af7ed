"""Exhaustive and randomized checks of the exact BST combinatorics.

Every suite returns a :class:`SuiteResult` with the number of cases tried and
the number that failed, plus the first few counterexamples.  The exhaustive
suites run over every permutation of ``1..n`` up to a size bound; the
randomized ones draw point sets of size at most 200.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy import stats as sps

from .bst import (
    PointSet,
    bst_from_points,
    bst_from_sequence,
    decompose,
    flank_labels,
    insert,
    is_ancestor_by_condition,
    is_chain,
    maximal_chain,
    maximal_chain_indices,
    points_height,
    sequence_depths,
    LabeledBst,
)
from .samplers import replicate_rng, sample_poissonized, thin
from .permutons import LebesgueSquare, parse_model
from .stats import lds, lis, records

__all__ = [
    "SuiteResult",
    "ancestor_condition",
    "subtree_proportion",
    "shape_invariance",
    "height_chain",
    "records_rightmost_branch",
    "height_vs_monotone",
    "lis_bruteforce",
    "chain_restriction",
    "top_hanging_sandwich",
    "halving_example",
    "halving_points",
    "binomial_domination",
    "thinning_domination",
    "EXHAUSTIVE",
    "RANDOMIZED",
    "run_suites",
]

MAX_EXAMPLES = 5


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: int = 0
    seconds: float = 0.0
    examples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.cases > 0

    def record(self, ok: bool, example=None) -> None:
        self.cases += 1
        if not ok:
            self.failures += 1
            if len(self.examples) < MAX_EXAMPLES:
                self.examples.append(example)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


def _all_permutations(max_n: int, min_n: int = 1):
    for n in range(min_n, max_n + 1):
        for p in permutations(range(1, n + 1)):
            yield p


def _fold_insert(seq) -> LabeledBst:
    t = LabeledBst.empty()
    for v in seq:
        t = insert(t, v)
    return t


# -- exhaustive suites -------------------------------------------------------

@_timed
def ancestor_condition(max_n: int = 7) -> SuiteResult:
    """Prefix condition on earlier values vs. ancestry in the built tree."""
    res = SuiteResult("ancestor_condition")
    for p in _all_permutations(max_n, 2):
        t = bst_from_sequence(p)
        n = len(p)
        for j in range(1, n):
            for i in range(j):
                ok = is_ancestor_by_condition(p, i, j) == t.is_ancestor(i, j)
                res.record(ok, (p, i, j))
    return res


@_timed
def subtree_proportion(max_n: int = 7) -> SuiteResult:
    """Descendant count of node ``k`` equals the number of later labels
    (including its own) falling strictly between its two flanks."""
    res = SuiteResult("subtree_proportion")
    for p in _all_permutations(max_n):
        t = bst_from_sequence(p)
        arr = np.asarray(p)
        n = len(p)
        sizes = t.subtree_sizes
        for k in range(n):
            lo, hi = flank_labels(t, t.word(k), lo=0.0, hi=n + 1.0)
            later = arr[k:]
            count = int(np.count_nonzero((later > lo) & (later < hi)))
            res.record(count == sizes[k], (p, k))
    return res


@_timed
def shape_invariance(max_n: int = 7, seed: int = 0) -> SuiteResult:
    """Tree of a point set has the same shape as the tree of its permutation."""
    res = SuiteResult("shape_invariance")
    rng = np.random.default_rng(seed)
    for p in _all_permutations(max_n):
        n = len(p)
        x = rng.permutation(np.sort(rng.random(n)))
        ys = np.sort(rng.random(n))
        # point with the i-th smallest x gets the p[i]-th smallest y
        y = np.empty(n)
        y[np.argsort(x)] = ys[np.asarray(p) - 1]
        pts = PointSet(x, y)
        res.record(bst_from_points(pts).shape() == _fold_insert(p).shape(), p)
    return res


@_timed
def height_chain(max_n: int = 7) -> SuiteResult:
    """Height is the size of the largest chain minus one.

    The largest chain size is computed independently of the tree: the depth
    of element ``j`` is the number of earlier elements satisfying the
    ancestor condition with it.
    """
    res = SuiteResult("height_chain")
    for p in _all_permutations(max_n):
        t = bst_from_sequence(p)
        n = len(p)
        depth = [sum(is_ancestor_by_condition(p, i, j) for i in range(j)) for j in range(n)]
        chain = maximal_chain(t)
        idx = maximal_chain_indices(t)
        pts = PointSet(np.arange(n, dtype=float), np.asarray(p, dtype=float))
        ok = (
            t.height == max(depth)
            and len(chain) == t.height + 1
            and all(t.node(w) is not None for w in chain)
            and is_chain(pts, idx)
        )
        res.record(ok, p)
    return res


@_timed
def records_rightmost_branch(max_n: int = 7) -> SuiteResult:
    res = SuiteResult("records_rightmost_branch")
    for p in _all_permutations(max_n):
        t = bst_from_sequence(p)
        k = 0
        while t.node("1" * (k + 1)) is not None:
            k += 1
        res.record(records(p) == k + 1 and records(p) - 1 <= t.height, p)
    return res


def _perm_matrix(n: int) -> np.ndarray:
    return np.array(list(permutations(range(1, n + 1))), dtype=np.int64).reshape(-1, n)


def _brute_monotone(perms: np.ndarray, sign: int) -> np.ndarray:
    """Longest monotone subsequence of every row by scanning all subsets."""
    rows, n = perms.shape
    best = np.ones(rows, np.int64) if n else np.zeros(rows, np.int64)
    for mask in range(1, 2**n):
        cols = [c for c in range(n) if mask >> c & 1]
        if len(cols) < 2:
            continue
        sub = perms[:, cols] * sign
        mono = np.all(sub[:, 1:] > sub[:, :-1], axis=1)
        best = np.where(mono, np.maximum(best, len(cols)), best)
    return best


@_timed
def height_vs_monotone(max_n: int = 8) -> SuiteResult:
    """``h <= LIS + LDS``."""
    res = SuiteResult("height_vs_monotone")
    for p in _all_permutations(max_n):
        h = bst_from_sequence(p).height
        res.record(h <= lis(p) + lds(p), p)
    return res


@_timed
def lis_bruteforce(max_n: int = 8) -> SuiteResult:
    """Patience sorting vs. subset enumeration, plus ``LIS * LDS >= n``."""
    res = SuiteResult("lis_bruteforce")
    for n in range(1, max_n + 1):
        perms = _perm_matrix(n)
        up = _brute_monotone(perms, 1)
        down = _brute_monotone(perms, -1)
        for row, a, b in zip(perms, up, down):
            la, lb = lis(row), lds(row)
            res.record(la == a and lb == b and la * lb >= n, tuple(row))
    return res


# -- randomized suites -------------------------------------------------------

_RANDOM_MODELS = ("lebesgue", "mallows:gamma=5", "band:beta=0.2", "strips", "mu1")


def _random_points(rng, max_n: int):
    model = parse_model(_RANDOM_MODELS[rng.integers(len(_RANDOM_MODELS))])
    n = int(rng.integers(1, max_n + 1))
    x, y = model.sample(rng, n)
    return PointSet(x, y)


@_timed
def chain_restriction(cases: int = 10_000, max_n: int = 200, seed: int = 0) -> SuiteResult:
    """A maximal chain of the larger tree stays a chain after deleting points."""
    res = SuiteResult("chain_restriction")
    for c in range(cases):
        rng = replicate_rng(seed, 1, c)
        big = _random_points(rng, max_n)
        keep = rng.random(len(big)) < rng.random()
        kept = np.flatnonzero(keep)
        t = bst_from_points(big)
        chain_pts = big.x_order[maximal_chain_indices(t)]
        small = big.subset(kept)
        # position of each original index inside the small set
        where = np.full(len(big), -1, np.int64)
        where[kept] = np.arange(len(kept))
        inside = where[chain_pts[keep[chain_pts]]]
        removed = int(np.count_nonzero(~keep[chain_pts]))
        ok = is_chain(small, inside) and points_height(small) >= t.height - removed
        res.record(ok, (seed, c))
    return res


@_timed
def top_hanging_sandwich(cases: int = 10_000, max_n: int = 200, seed: int = 0) -> SuiteResult:
    """``h(top) <= h(P) <= h(top) + 1 + max h(hanging)``.

    Hanging heights are also recomputed in one pass with the grouped depth
    kernel as an independent check of the decomposition.
    """
    res = SuiteResult("top_hanging_sandwich")
    for c in range(cases):
        rng = replicate_rng(seed, 2, c)
        pts = _random_points(rng, max_n)
        beta = float(rng.random())
        dec = decompose(pts, beta)
        h = points_height(pts)
        ht = points_height(dec.top)
        hang = [points_height(s) for s in dec.hanging]
        ok = ht <= h <= ht + 1 + max(hang)
        ok &= abs(dec.widths.sum() - 1.0) < 1e-12 and np.all(dec.widths >= 0)
        ok &= sum(len(s) for s in dec.hanging) + len(dec.top) == len(pts)
        rest = pts.x > beta
        if rest.any():
            ys = pts.y_sequence()
            xs = pts.x[pts.x_order]
            sel = xs > beta
            groups = np.searchsorted(np.sort(dec.top.y), ys[sel])
            d = sequence_depths(ys[sel], groups)
            alt = np.full(len(dec.hanging), -1)
            np.maximum.at(alt, groups, d)
            ok &= list(alt) == hang
        res.record(bool(ok), (seed, c, beta))
    return res


def halving_points(n: int):
    """Diagonal set and the same set plus one point at ``(0, 1/2)``."""
    if n % 2 == 0 or n < 3:
        raise ValueError("n must be odd and >= 3")
    d = np.arange(1, n) / n
    minus = PointSet(d, d)
    plus = PointSet(np.append(d, 0.0), np.append(d, 0.5))
    return minus, plus


@_timed
def halving_example(n: int = 101) -> SuiteResult:
    """One extra point can halve the height of a diagonal."""
    res = SuiteResult("halving_example")
    minus, plus = halving_points(n)
    res.record(points_height(minus) == n - 2, ("minus", points_height(minus)))
    res.record(points_height(plus) == (n - 1) // 2, ("plus", points_height(plus)))
    return res


# -- domination harnesses ----------------------------------------------------

@_timed
def binomial_domination(trials: int = 20_000, seed: int = 0, grid=None) -> SuiteResult:
    """Overlap of a fixed ``i``-set with a uniform ``j``-subset of ``m`` items
    is dominated by ``Binomial(i, j / (m - i))``, up to 3 sigma of noise."""
    res = SuiteResult("binomial_domination")
    if grid is None:
        grid = [(m, i, j) for m in (10, 30, 60) for i in (1, m // 5, m // 3) for j in (1, m // 4, m // 2)
                if i + j <= m]
    for g, (m, i, j) in enumerate(grid):
        rng = replicate_rng(seed, 3, g)
        ranks = np.argsort(rng.random((trials, m)), axis=1)[:, :j]
        overlap = np.count_nonzero(ranks < i, axis=1)
        p = j / (m - i)
        for t in range(1, i + 1):
            emp = np.mean(overlap >= t)
            bound = sps.binom.sf(t - 1, i, p)
            slack = 3 * np.sqrt(max(emp * (1 - emp), 1.0 / trials) / trials)
            res.record(emp <= bound + slack, (m, i, j, t, emp, bound))
    return res


@_timed
def thinning_domination(reps: int = 2000, n: float = 500.0, ratios=(0.25, 0.5, 0.9), seed: int = 0) -> SuiteResult:
    """Thinning a homogeneous Poisson sample with keep probability ``r``:
    ``h(thinned) + 1`` dominates ``Binomial(1 + h(full), r)``.

    Checked pathwise (the kept part of a maximal chain is a chain) and on
    the empirical CDFs with 3 sigma slack.
    """
    res = SuiteResult("thinning_domination")
    model = LebesgueSquare()
    for g, r in enumerate(ratios):
        lhs = np.empty(reps, np.int64)
        rhs = np.empty(reps, np.int64)
        for k in range(reps):
            rng = replicate_rng(seed, 4, g, k)
            full = sample_poissonized(model, n, rng)
            small, kept = thin(full, r, rng, return_indices=True)
            t = bst_from_points(full)
            chain_pts = full.x_order[maximal_chain_indices(t)] if len(full) else np.empty(0, np.int64)
            lhs[k] = points_height(small) + 1
            rhs[k] = rng.binomial(t.height + 1, r)
            res.record(lhs[k] >= np.isin(chain_pts, kept).sum(), ("pathwise", r, k))
        top = int(max(lhs.max(), rhs.max()))
        for t in range(top + 1):
            fl = np.mean(lhs <= t)
            fr = np.mean(rhs <= t)
            slack = 3 * np.sqrt((fl * (1 - fl) + fr * (1 - fr) + 1.0 / reps) / reps)
            res.record(fl <= fr + slack, ("cdf", r, t, fl, fr))
    return res


EXHAUSTIVE = {
    "ancestor_condition": ancestor_condition,
    "subtree_proportion": subtree_proportion,
    "shape_invariance": shape_invariance,
    "height_chain": height_chain,
    "records_rightmost_branch": records_rightmost_branch,
    "height_vs_monotone": height_vs_monotone,
    "lis_bruteforce": lis_bruteforce,
    "halving_example": halving_example,
}

RANDOMIZED = {
    "chain_restriction": chain_restriction,
    "top_hanging_sandwich": top_hanging_sandwich,
    "binomial_domination": binomial_domination,
    "thinning_domination": thinning_domination,
}


def run_suites(names=None, scale: float = 1.0, seed: int = 0) -> list[SuiteResult]:
    """Run the named suites (all by default); ``scale`` shrinks the randomized
    case counts, the exhaustive ones always run in full."""
    out = []
    for name in names or list(EXHAUSTIVE) + list(RANDOMIZED):
        if name in EXHAUSTIVE:
            out.append(EXHAUSTIVE[name]())
        elif name == "binomial_domination":
            out.append(binomial_domination(trials=max(1000, int(20_000 * scale)), seed=seed))
        elif name == "thinning_domination":
            out.append(thinning_domination(reps=max(200, int(2000 * scale)), seed=seed))
        elif name in RANDOMIZED:
            out.append(RANDOMIZED[name](cases=max(1, int(10_000 * scale)), seed=seed))
        else:
            raise KeyError(f"unknown suite {name!r}")
    return out
