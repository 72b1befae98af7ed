"""Acceptance criteria at full size; run alone with ``python tests/test_acceptance.py``."""
import time

import numpy as np
import pytest

from permuton_bst import verify
from permuton_bst.bst import points_height
from permuton_bst.experiments import KINDS, ExperimentSpec, run
from permuton_bst.limit import psi_from_labels
from permuton_bst.stats import C_STAR

SEED = 2024

pytestmark = pytest.mark.acceptance


def _failed(rec, prefix=""):
    return [c.name for c in rec.checks if c.name.startswith(prefix) and not c.passed]


def test_exhaustive_combinatorics(verdict):
    t = time.perf_counter()
    res = [fn() for fn in verify.EXHAUSTIVE.values()]
    secs = time.perf_counter() - t
    fails = sum(r.failures for r in res)
    cases = sum(r.cases for r in res)
    ok = fails == 0 and secs < 60
    verdict("exhaustive small permutations", ok, f"{cases} cases, {fails} failures, {secs:.1f}s (< 60s)")
    assert ok, [(r.name, r.examples) for r in res if not r.passed]


def test_chain_and_sandwich(verdict):
    t = time.perf_counter()
    res = [verify.chain_restriction(cases=10_000, seed=SEED), verify.top_hanging_sandwich(cases=10_000, seed=SEED)]
    secs = time.perf_counter() - t
    fails = sum(r.failures for r in res)
    ok = fails == 0 and secs < 30 and all(r.cases >= 10_000 for r in res)
    verdict("chain restriction and decomposition sandwich", ok,
            f"{[r.cases for r in res]} cases, {fails} failures, {secs:.1f}s (< 30s)")
    assert ok


def test_halving_regression(verdict):
    minus, plus = verify.halving_points(101)
    hm, hp = points_height(minus), points_height(plus)
    ok = hm == 99 and hp == 50
    verdict("one extra point halves the diagonal at n=101", ok, f"h-={hm}, h+={hp} (99, 50)")
    assert ok


def _grid_root(f, lo, hi, steps):
    # sign change on a uniform grid, then the same on the bracketing cell
    for _ in range(2):
        c = np.linspace(lo, hi, steps + 1)
        v = f(c)
        i = int(np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0])
        lo, hi = c[i], c[i + 1]
    return 0.5 * (lo + hi)


def test_c_star(verdict):
    f = lambda c: c * np.log(2 * np.e / c) - 1.0
    resid = abs(f(C_STAR))
    scan = _grid_root(f, 2.0, 2 * np.e, 100_000)
    ok = resid < 1e-9 and abs(scan - C_STAR) < 1e-6 and C_STAR >= 2
    verdict("c* root", ok, f"c*={C_STAR:.12f}, residual {resid:.1e}, grid scan diff {abs(scan - C_STAR):.1e}")
    assert ok


def test_height_universality(verdict):
    t = time.perf_counter()
    recs = [run(ExperimentSpec("height-scan", model=m, n=(10**3, 10**4, 10**5, 10**6), reps=50, seed=SEED, threads=1))
            for m in ("lebesgue", "mallows:gamma=2")]
    secs = time.perf_counter() - t
    means = {r.spec.model: [round(float(np.mean(r.values("ratio", n))), 4) for n in r.spec.n] for r in recs}
    bad = [f"{r.spec.model}:{name}" for r in recs for name in
           _failed(r, "mean_ratio_band@100000") + _failed(r, "mean_ratio_nondecreasing") + _failed(r, "height_le")]
    ok = not bad and secs < 900
    verdict("height ratio band at 1e5 and monotone means", ok, f"means {means}, {secs:.0f}s (< 900s) {bad or ''}")
    assert ok


def test_subtree_size_convergence(verdict):
    worst, bad = {}, []
    for m in ("lebesgue", "mallows:gamma=2", "strips"):
        rec = run(ExperimentSpec("ssc-scan", model=m, n=(10**5,), reps=1000, samples=10_000, depth=2, seed=SEED))
        ks = [c for c in rec.checks if c.name.startswith("ks_t_vs_psi")]
        assert len(ks) == 7
        worst[m] = round(max(c.value for c in ks), 4)
        bad += [f"{m}:{c.name}={c.value:.4f}" for c in ks if not c.passed]
    verdict("subtree fractions vs psi, KS < 0.05 at depth <= 2", not bad, f"max KS {worst} {bad or ''}")
    assert not bad


def test_deep_tree_records(verdict):
    rec = run(ExperimentSpec("deep-tree", model="strips", n=(10**4,), reps=1000, threshold=27, seed=SEED))
    c = rec.check("records_ge_27@10000")
    verdict("strips records >= 27 in >= 95% at n=1e4", c.passed, f"fraction {c.value:.3f}")
    assert c.passed


def test_band_lower_bound(verdict):
    rec = run(ExperimentSpec("band-tree", beta=0.1, n=(10**5,), reps=200, threshold=5.0, seed=SEED))
    a, b = rec.check("ratio_ge_5@100000"), rec.check("mean_ratio_exceeds_lebesgue@100000")
    ok = a.passed and b.passed
    verdict("band beta=0.1 h/log n >= 5 in >= 90%, above lebesgue", ok,
            f"fraction {a.value:.3f}, mean margin {b.value:.3f}")
    assert ok


def test_depoissonization_sandwich(verdict):
    rec = run(ExperimentSpec("depoissonize", n=(10**4,), alpha=0.6, reps=1100, seed=SEED))
    valid = rec.extra["valid_replicates"]
    c = rec.check("sandwich_violations")
    ok = c.passed and valid >= 1000
    verdict("coupling sandwich over >= 1e3 valid triples", ok, f"{valid} valid, {c.value} violations")
    assert ok


def test_model_validity(verdict):
    rec = run(ExperimentSpec("model-check", model="all", n=(10**6,), seed=SEED))
    devs = [c for c in rec.checks if c.name.startswith("marginal_deviation")]
    quad = rec.check("mallows_marginal_quadrature")
    ok = len(devs) == 9 and all(c.passed for c in devs) and quad.passed
    verdict("catalog marginals < 0.005 and Mallows quadrature < 1e-8", ok,
            f"worst {max(c.value for c in devs):.4f}, quadrature {quad.value:.1e}")
    assert ok


def test_psi_consistency(verdict):
    fig = psi_from_labels((0.73, 0.33, 0.75, 0.35, 0.68, 0.28, 0.72, 0.87, 0.25, 0.67), 3)
    parts, ok = [], fig.values["011"] == 0.73 - 0.35 and f"{fig.values['011']:.2f}" == "0.38"
    parts.append(f"worked value {fig.values['011']!r}")
    for method in ("insertion", "conditional"):
        rec = run(ExperimentSpec("limit-sample", model="lebesgue", depth=4, reps=10_000, method=method, seed=SEED))
        v = rec.check("additivity_violations")
        ok &= v.passed and len(rec.values("complete")) == 10_000
        parts.append(f"{method}: {v.value} violations, {rec.extra['partial_samples']} partial")
    verdict("psi additivity over 1e4 samples at depth 4", ok, "; ".join(parts))
    assert ok


SMALL = {
    "height-scan": dict(n=(1000, 3000), reps=6),
    "ssc-scan": dict(n=(2000,), reps=8, samples=200),
    "verify-lemmas": dict(scale=0.01),
    "deep-tree": dict(n=(2500,), reps=8),
    "band-tree": dict(n=(3000,), reps=4),
    "depoissonize": dict(n=(2000,), reps=12),
    "limit-sample": dict(reps=50, depth=4),
    "model-check": dict(model="all", n=(10**4,)),
}


def test_determinism(verdict):
    differ = []
    for kind in KINDS:
        texts = [run(ExperimentSpec(kind, seed=SEED, threads=t, **SMALL[kind])).csv_text() for t in (1, 8, 1)]
        if len(set(texts)) != 1:
            differ.append(kind)
    verdict("byte-identical CSV at threads 1 and 8", not differ, f"{len(KINDS)} kinds {differ or ''}")
    assert not differ


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
