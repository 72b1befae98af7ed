import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from permuton_bst.bst import bst_from_sequence, flank_labels
from permuton_bst.distributions import PointMass, TentPower, TruncatedExponential, Uniform
from permuton_bst.limit import (
    MAX_DEPTH,
    PartialSampleError,
    branch_prefix_frequencies,
    psi_from_labels,
    sample_branch,
    sample_psi,
    words_up_to,
)
from permuton_bst.stats import ks_distance, ks_two_sample

WORKED_LABELS = (0.73, 0.33, 0.75, 0.35, 0.68, 0.28, 0.72, 0.87, 0.25, 0.67)


def test_words_up_to():
    assert words_up_to(0) == [""]
    assert words_up_to(2) == ["", "0", "1", "00", "01", "10", "11"]
    assert len(words_up_to(5)) == 2**6 - 1


def test_worked_example():
    s = psi_from_labels(WORKED_LABELS, 3)
    assert s.values["011"] == 0.73 - 0.35
    assert round(s.values["011"], 10) == 0.38
    assert s.unresolved == ("100", "101")
    assert not s.complete
    assert s.values["0"] == 0.73 and s.values["1"] == 1 - 0.73


@given(st.lists(st.floats(0.001, 0.999), unique=True, min_size=1, max_size=200), st.integers(0, 6))
def test_psi_matches_tree_flanks(labels, depth):
    s = psi_from_labels(labels, depth)
    t = bst_from_sequence(labels)
    for w, v in s.values.items():
        lo, hi = flank_labels(t, w)
        assert v == hi - lo
    assert s.values[""] == 1.0
    assert s.additivity_violations() == 0


def test_psi_text_format():
    s = psi_from_labels(WORKED_LABELS, 2)
    lines = s.to_text().splitlines()
    assert lines[0] == "\t1.0"
    assert [ln.split("\t")[0] for ln in lines] == words_up_to(2)


@pytest.mark.parametrize("method", ["insertion", "conditional"])
def test_sample_psi_basic_invariants(method):
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = sample_psi(Uniform(), 4, rng, method=method)
        assert s.complete and s.values[""] == 1.0
        assert all(0.0 <= v <= 1.0 for v in s.values.values())
        assert s.additivity_violations() == 0
        assert s.values["0"] == s.labels[""] and s.values["1"] == 1 - s.labels[""]


def test_sample_psi_refuses_atoms_and_bad_depth():
    with pytest.raises(ValueError):
        sample_psi(PointMass(0.5), 3, np.random.default_rng())
    with pytest.raises(ValueError):
        sample_psi(Uniform(), MAX_DEPTH + 1, np.random.default_rng())
    with pytest.raises(ValueError):
        sample_psi(Uniform(), 2, np.random.default_rng(), method="magic")


def test_budget_reports_unresolved_words():
    with pytest.raises(PartialSampleError) as info:
        sample_psi(Uniform(), 8, np.random.default_rng(1), budget=50)
    part = info.value.partial
    assert part.insertions_used == 50
    assert part.unresolved and "unresolved" in str(info.value)
    assert part.additivity_violations() == 0


def test_depth_zero():
    s = sample_psi(Uniform(), 0, np.random.default_rng())
    assert s.values == {"": 1.0} and s.insertions_used == 0


def test_psi_zero_is_uniform_for_uniform_labels():
    rng = np.random.default_rng(2)
    v = [sample_psi(Uniform(), 1, rng).values["0"] for _ in range(10**4)]
    assert ks_distance(v, lambda t: t) < 0.025


@pytest.mark.parametrize("mu0", [Uniform(), Uniform(0, 0.5), TruncatedExponential(4.0), TentPower(1.0)])
def test_insertion_and_conditional_routes_agree(mu0):
    words = words_up_to(3)
    def draw(method, offset):
        out = []
        for k in range(3000):
            s = sample_psi(mu0, 3, np.random.default_rng(offset + k), method=method)
            out.append([s.values[w] for w in words])
        return np.array(out)

    a = draw("insertion", 0)
    b = draw("conditional", 10**6)
    for j in range(1, len(words)):
        # two-sample KS 99.9% critical value for 3000 vs 3000 is about 0.050
        assert ks_two_sample(a[:, j], b[:, j]) < 0.05


def test_branch_first_bit_uniform():
    freq = branch_prefix_frequencies(Uniform(), 1, 10**5, np.random.default_rng(3))
    assert 0.494 <= freq["0"] <= 0.506
    assert freq["0"] + freq["1"] == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_branch_intervals_nested(depth, seed):
    b = sample_branch(TruncatedExponential(3.0), depth, np.random.default_rng(seed))
    assert len(b.word) == depth and set(b.word) <= {"0", "1"}
    iv = b.intervals
    assert iv.shape == (depth + 1, 2) and tuple(iv[0]) == (0.0, 1.0)
    for (a0, b0), (a1, b1) in zip(iv[:-1], iv[1:]):
        assert a0 <= a1 < b1 <= b0


def test_branch_loop_and_vectorised_agree():
    rng = np.random.default_rng(4)
    words = [sample_branch(Uniform(), 2, rng).word for _ in range(4000)]
    freq = branch_prefix_frequencies(Uniform(), 2, 10**5, np.random.default_rng(5))
    for w in ["00", "01", "10", "11"]:
        p = freq[w]
        emp = words.count(w) / 4000
        assert abs(emp - p) < 3 * math.sqrt(p * (1 - p) / 4000) + 3 * math.sqrt(p * (1 - p) / 10**5)


@pytest.mark.parametrize("mu0", [Uniform(), TruncatedExponential(4.0), Uniform(0, 0.5)])
def test_branch_prefix_probability_equals_mean_psi(mu0):
    count = 10**5
    freq = branch_prefix_frequencies(mu0, 3, count, np.random.default_rng(6))
    rng = np.random.default_rng(7)
    samples = [sample_psi(mu0, 3, rng, method="conditional") for _ in range(4000)]
    for w in words_up_to(3)[1:]:
        v = np.array([s.values[w] for s in samples])
        p = freq[w]
        se = math.sqrt(p * (1 - p) / count + v.var() / len(v))
        assert abs(p - v.mean()) < 3 * se
