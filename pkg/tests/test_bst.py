import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from permuton_bst.bst import (
    DuplicateLabelError,
    LabeledBst,
    PointSet,
    bst_from_points,
    bst_from_sequence,
    decompose,
    flank_labels,
    height,
    insert,
    is_ancestor_by_condition,
    is_chain,
    maximal_chain,
    maximal_chain_indices,
    permutation_from_points,
    points_height,
    read_points,
    sequence_depths,
    subtree_fraction,
    write_points,
)

FIG1 = (2, 4, 1, 6, 3, 5)

distinct_floats = st.lists(st.floats(0, 1, allow_nan=False), min_size=0, max_size=60, unique=True)


def fold(seq):
    t = LabeledBst.empty()
    for v in seq:
        t = insert(t, v)
    return t


def test_insert_first_label_is_root():
    t = insert(LabeledBst.empty(), 2)
    assert t.items() == [("", 2.0)]
    assert t.height == 0


def test_insert_matches_figure_sequence():
    t = fold([2, 4, 1, 6])
    t = insert(t, 3)
    assert t.label("10") == 3 and t.label("1") == 4
    t = insert(t, 5)
    assert t.label("110") == 5 and t.label("11") == 6


def test_insert_duplicate_rejected():
    with pytest.raises(DuplicateLabelError):
        insert(fold([1, 2]), 2)
    with pytest.raises(DuplicateLabelError):
        bst_from_sequence([3, 1, 3])


def test_figure_tree():
    t = bst_from_sequence(FIG1)
    assert t.items() == [("", 2.0), ("0", 1.0), ("1", 4.0), ("10", 3.0), ("11", 6.0), ("110", 5.0)]
    assert t.height == 3 and t.label("") == 2
    assert height(t) == 3


def test_sorted_input_is_path_and_empty_height():
    t = bst_from_sequence([1, 2, 3, 4])
    assert t.words() == ["", "1", "11", "111"]
    assert t.height == 3
    assert bst_from_sequence([]).height == -1
    assert points_height(PointSet([], [])) == -1


def test_permutation_from_points_examples():
    diag = PointSet([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
    anti = PointSet([0.1, 0.5, 0.9], [0.9, 0.5, 0.1])
    assert list(permutation_from_points(diag)) == [1, 2, 3]
    assert list(permutation_from_points(anti)) == [3, 2, 1]


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_permutation_from_points_double_argsort_oracle(n, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random(n), rng.random(n)
    sigma = permutation_from_points(PointSet(x, y))
    ys = y[np.argsort(x)]
    assert list(sigma) == list(np.argsort(np.argsort(ys)) + 1)
    assert sorted(sigma) == list(range(1, n + 1))


def test_bst_from_points_trivial_cases():
    d = np.linspace(0.1, 0.9, 5)
    assert bst_from_points(PointSet(d, d)).words() == ["", "1", "11", "111", "1111"]
    assert bst_from_points(PointSet([0.3], [0.7])).items() == [("", 0.7)]


def test_pointset_rejects_duplicates():
    with pytest.raises(DuplicateLabelError):
        PointSet([0.1, 0.1], [0.2, 0.3])
    with pytest.raises(DuplicateLabelError):
        PointSet([0.1, 0.2], [0.3, 0.3])
    with pytest.raises(ValueError):
        PointSet([0.1, 0.2], [0.3])


@settings(max_examples=200)
@given(distinct_floats)
def test_kernel_tree_equals_fold_of_insert(labels):
    a = bst_from_sequence(labels)
    b = fold(labels)
    assert a.items() == b.items()
    assert a.height == b.height


@given(distinct_floats)
def test_bst_order_and_prefix_closed(labels):
    t = bst_from_sequence(labels)
    items = dict(t.items())
    for w, lab in items.items():
        if w:
            assert w[:-1] in items
        for u, other in items.items():
            if u.startswith(w + "0"):
                assert other < lab
            if u.startswith(w + "1"):
                assert other > lab


def test_subtree_fraction_examples():
    t = bst_from_sequence(FIG1)
    assert subtree_fraction(t, "") == 1.0
    assert subtree_fraction(t, "1") == pytest.approx(4 / 6)
    assert subtree_fraction(t, "01") == 0.0
    with pytest.raises(ValueError):
        subtree_fraction(LabeledBst.empty(), "")


@given(distinct_floats.filter(lambda s: len(s) > 0))
def test_descendant_counts_add_up(labels):
    t = bst_from_sequence(labels)
    sizes = t.subtree_sizes
    for i in range(t.size):
        kids = [c for c in (t.left[i], t.right[i]) if c >= 0]
        assert sizes[i] == 1 + sum(sizes[c] for c in kids)


def test_flank_labels_examples():
    t = bst_from_sequence([0.5, 0.2, 0.8, 0.3, 0.4])
    assert flank_labels(t, "") == (0.0, 1.0)
    # 011 sits right of 01 and left of the root
    assert flank_labels(t, "011") == (t.label("01"), t.label(""))
    with pytest.raises(KeyError):
        flank_labels(t, "0000")


@given(distinct_floats.filter(lambda s: len(s) > 0))
def test_flank_recursions(labels):
    t = bst_from_sequence(labels)
    for w in t.words():
        lo, hi = flank_labels(t, w)
        lab = t.label(w)
        assert lo < lab < hi or (lo <= lab <= hi and lab in (0.0, 1.0))
        assert flank_labels(t, w + "0") == (lo, lab)
        assert flank_labels(t, w + "1") == (lab, hi)


def test_ancestor_condition_examples():
    seq = FIG1
    # spec examples are 1-based: (i=2, j=6) and (i=3, j=5)
    assert is_ancestor_by_condition(seq, 1, 5)
    assert not is_ancestor_by_condition(seq, 2, 4)
    assert all(is_ancestor_by_condition(seq, 0, j) for j in range(1, 6))
    with pytest.raises(IndexError):
        is_ancestor_by_condition(seq, 3, 3)


@given(st.permutations(range(7)))
def test_ancestor_condition_matches_tree(p):
    t = bst_from_sequence(p)
    for i, j in itertools.combinations(range(7), 2):
        assert is_ancestor_by_condition(p, i, j) == t.is_ancestor(i, j)


def test_maximal_chain_examples():
    t = bst_from_sequence(FIG1)
    chain = maximal_chain(t)
    assert [t.label(w) for w in chain] == [2, 4, 6, 5]
    assert maximal_chain(bst_from_sequence([0.4])) == [""]
    with pytest.raises(ValueError):
        maximal_chain(LabeledBst.empty())


def test_maximal_chain_tie_break_is_lexicographic():
    # leaves "00" and "11" are equally deep
    t = bst_from_sequence([0.5, 0.25, 0.75, 0.1, 0.9])
    assert maximal_chain(t) == ["", "0", "00"]


@given(distinct_floats.filter(lambda s: len(s) > 0))
def test_maximal_chain_length_is_height_plus_one(labels):
    t = bst_from_sequence(labels)
    idx = maximal_chain_indices(t)
    assert len(idx) == t.height + 1
    assert all(t.is_ancestor(a, b) for a, b in zip(idx[:-1], idx[1:]))


def test_is_chain_examples():
    pts = PointSet(np.arange(6) / 6 + 0.01, np.array(FIG1) / 10)
    index = {v: i for i, v in enumerate(FIG1)}
    assert is_chain(pts, [index[3]])
    assert is_chain(pts, [index[2], index[4], index[3]])
    assert not is_chain(pts, [index[1], index[4]])
    with pytest.raises(IndexError):
        is_chain(pts, [0, 9])


def test_decompose_edge_cases():
    rng = np.random.default_rng(3)
    pts = PointSet(0.05 + 0.9 * rng.random(30), rng.random(30))
    full = decompose(pts, 0.99)
    assert full.k_beta == 30 and all(len(h) == 0 for h in full.hanging)
    none = decompose(pts, 0.01)
    assert none.k_beta == 0 and len(none.hanging) == 1 and len(none.hanging[0]) == 30
    assert none.gaps.tolist() == [[0.0, 1.0]]


@settings(max_examples=100)
@given(st.integers(1, 120), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_decompose_invariants_and_sandwich(n, beta, seed):
    rng = np.random.default_rng(seed)
    pts = PointSet(rng.random(n), rng.random(n))
    dec = decompose(pts, beta)
    assert dec.widths.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(dec.widths >= 0)
    assert np.all(dec.top.x <= beta)
    assert sum(len(h) for h in dec.hanging) == n - dec.k_beta
    for (lo, hi), h in zip(dec.gaps, dec.hanging):
        assert np.all((h.y > lo) & (h.y < hi)) and np.all(h.x > beta)
    ht = points_height(dec.top)
    hmax = max(points_height(h) for h in dec.hanging)
    assert ht <= points_height(pts) <= ht + 1 + hmax


@given(st.integers(1, 80), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_grouped_depths_match_separate_trees(n, groups, seed):
    rng = np.random.default_rng(seed)
    y = rng.random(n)
    g = rng.integers(0, groups, n)
    d = sequence_depths(y, g)
    for k in range(groups):
        sel = g == k
        if sel.any():
            t = bst_from_sequence(y[sel])
            assert list(d[sel]) == list(t.depth)


def test_tree_text_roundtrip():
    t = bst_from_sequence([0.73, 0.33, 0.75, 0.35, 0.68])
    text = t.to_text()
    assert text.splitlines()[0] == "\t0.73"
    back = LabeledBst.from_text(text)
    assert back.items() == t.items()
    with pytest.raises(ValueError):
        LabeledBst.from_text("\t0.5\n1\t0.2\n")


@given(distinct_floats)
def test_tree_text_roundtrip_random(labels):
    t = bst_from_sequence(labels)
    assert LabeledBst.from_text(t.to_text()).items() == t.items()


def test_point_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pts = PointSet(rng.random(50), rng.random(50))
    path = tmp_path / "p.tsv"
    write_points(pts, path, header="lebesgue\nseed 0")
    lines = path.read_text().splitlines()
    assert lines[0] == "# lebesgue" and lines[2].count("\t") == 1
    back = read_points(path)
    assert np.array_equal(back.x, pts.x) and np.array_equal(back.y, pts.y)


@pytest.mark.parametrize("body", ["0.1 0.2\n", "0.1\t1.5\n", "0.1\t0.2\n0.1\t0.3\n"])
def test_point_file_errors(tmp_path, body):
    path = tmp_path / "bad.tsv"
    path.write_text("# comment\n" + body)
    with pytest.raises(ValueError):
        read_points(path)
