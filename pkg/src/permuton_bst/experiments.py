"""Declarative, seed-reproducible experiment runner.

An :class:`ExperimentSpec` names an experiment kind, a model and its knobs;
``run(spec)`` returns a :class:`RunRecord` of long-format rows
``(experiment, model, n, replicate, metric, value)`` plus named checks.
Replicate ``r`` at size ``n`` always draws from
``replicate_rng(seed, n, r[, sub])``, so rows do not depend on the number of
worker threads or on scheduling order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bst import bst_from_points, maximal_chain_indices, points_height, subtree_fraction
from .limit import MAX_DEPTH, PartialSampleError, sample_psi, words_up_to
from .permutons import CATALOG, Mallows, mallows_marginal_integral, marginal_check, parse_model
from .samplers import depoissonization_coupling, replicate_rng, sample
from .stats import C_STAR, ks_two_sample, lds, lis, records
from .verify import run_suites

__all__ = [
    "KINDS",
    "ExperimentSpec",
    "Check",
    "RunRecord",
    "run",
    "run_height_scan",
    "run_ssc_scan",
    "run_verify_lemmas",
    "run_deep_tree",
    "run_band_tree",
    "run_depoissonize",
    "run_limit_sample",
    "run_model_check",
    "CSV_HEADER",
]

CSV_HEADER = ("experiment", "model", "n", "replicate", "metric", "value")

# finite-n band for the mean of h / (c* log n), applied from n = 1e5 up
RATIO_BAND = (0.80, 1.05)
RATIO_BAND_FROM = 10**5

_DEFAULTS = {
    "height-scan": dict(model="lebesgue", n=(10**3, 10**4, 10**5), reps=50),
    "ssc-scan": dict(model="lebesgue", n=(10**4,), reps=200, depth=2, samples=10**4),
    "verify-lemmas": dict(model="-", n=(), reps=1),
    "deep-tree": dict(model="strips", n=(10**4,), reps=1000),
    "band-tree": dict(model=None, n=(10**5,), reps=200),
    "depoissonize": dict(model="lebesgue", n=(10**4,), reps=1000),
    "limit-sample": dict(model="lebesgue", n=(), reps=10**4, depth=3),
    "model-check": dict(model="all", n=(10**6,), reps=1),
}
KINDS = tuple(_DEFAULTS)


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    model: str | None = None
    n: tuple = ()
    reps: int | None = None
    seed: int = 0
    out: str | None = None
    mode: str = "fixed"
    beta: float | None = None
    alpha: float = 0.6
    depth: int | None = None
    k: int = 1
    threshold: float | None = None
    samples: int | None = None
    method: str = "insertion"
    grid: int = 20
    scale: float = 1.0
    threads: int = 1

    def resolved(self) -> "ExperimentSpec":
        """Copy with kind defaults filled in; raises UsageError on bad input."""
        if self.kind not in _DEFAULTS:
            raise UsageError(f"unknown experiment {self.kind!r}; expected one of {', '.join(KINDS)}")
        d = _DEFAULTS[self.kind]
        fill = {k: v for k, v in d.items() if getattr(self, k) in (None, ())}
        spec = replace(self, **fill)
        spec = replace(spec, n=tuple(int(v) for v in spec.n))
        if spec.kind == "band-tree":
            spec = _resolve_band(spec)
        if spec.reps is None or spec.reps < 1:
            raise UsageError("replicate count must be >= 1")
        if any(v < 1 for v in spec.n):
            raise UsageError("n values must be positive")
        if spec.mode not in ("fixed", "poisson"):
            raise UsageError("mode must be 'fixed' or 'poisson'")
        if spec.method not in ("insertion", "conditional"):
            raise UsageError("method must be 'insertion' or 'conditional'")
        if not 0.5 < spec.alpha < 1.0:
            raise UsageError("alpha must lie in (1/2, 1)")
        if spec.depth is not None and not 0 <= spec.depth <= MAX_DEPTH:
            raise UsageError(f"depth must lie in [0, {MAX_DEPTH}]")
        if spec.threads < 1 or spec.k < 1 or spec.grid < 1 or spec.scale <= 0:
            raise UsageError("threads, k, grid and scale must be positive")
        if spec.seed < 0 or spec.seed >= 2**64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        if spec.model not in ("all", "-"):
            try:
                parse_model(spec.model)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        return spec

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        return d


def _resolve_band(spec: ExperimentSpec) -> ExperimentSpec:
    if spec.model is None:
        beta = 0.1 if spec.beta is None else spec.beta
        return replace(spec, model=f"band:beta={beta:g}", beta=beta)
    m = _parse(spec.model)
    if type(m).__name__ != "BandDiagonal":
        raise UsageError("band-tree needs a band:beta=<b> model")
    if spec.beta is not None and not math.isclose(spec.beta, m.beta):
        raise UsageError("--beta disagrees with the model string")
    return replace(spec, beta=m.beta)


def _parse(text):
    try:
        return parse_model(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: str
    kind: str = "statistical"  # statistical | invariant

    def to_dict(self) -> dict:
        v = self.value
        if isinstance(v, (int, np.integer)):
            v = int(v)
        elif v is not None:
            v = float(v) if math.isfinite(v) else None
        return dict(name=self.name, passed=bool(self.passed), kind=self.kind, value=v, threshold=self.threshold)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass
class RunRecord:
    spec: ExperimentSpec
    rows: list
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r[0], r[1], r[2], r[3], r[4], _fmt(r[5])])
        return buf.getvalue()

    def values(self, metric: str, n: int | None = None, model: str | None = None) -> np.ndarray:
        return np.array([float(r[5]) for r in self.rows
                         if r[4] == metric and (n is None or r[2] == n) and (model is None or r[1] == model)])

    def summary(self) -> list:
        groups = {}
        for r in self.rows:
            groups.setdefault((r[1], r[2], r[4]), []).append(float(r[5]))
        out = []
        for (model, n, metric), vals in groups.items():
            v = np.array(vals)
            v = v[~np.isnan(v)]
            if len(v) == 0:
                continue
            q = np.quantile(v, [0.05, 0.5, 0.95])
            out.append(dict(model=model, n=n, metric=metric, count=len(v), mean=float(v.mean()),
                            std=float(v.std(ddof=1)) if len(v) > 1 else 0.0,
                            q05=float(q[0]), q50=float(q[1]), q95=float(q[2])))
        return out

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def exit_code(self) -> int:
        if any(not c.passed and c.kind == "invariant" for c in self.checks):
            return 3
        if any(not c.passed for c in self.checks):
            return 1
        return 0

    def sidecar(self) -> dict:
        return dict(
            spec=self.spec.to_dict(),
            version=self.version,
            wall_clock_seconds=self.wall_clock,
            row_count=len(self.rows),
            seed_streams="PCG64(SeedSequence(seed, spawn_key=(n, replicate[, sub])))",
            exit_code=self.exit_code,
            checks=[c.to_dict() for c in self.checks],
            summary=self.summary(),
            **self.extra,
        )

    def write(self, out) -> tuple[Path, Path]:
        """Write the CSV to ``out`` and the JSON sidecar next to it."""
        out = Path(out)
        side = out.with_suffix(".json") if out.suffix and out.suffix != ".json" else Path(str(out) + ".json")
        out.write_text(self.csv_text(), encoding="utf-8")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
        return out, side


# -- plumbing ----------------------------------------------------------------

def _map(fn, tasks, threads: int) -> list:
    """``[fn(t) for t in tasks]``, optionally on a thread pool; order kept."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _grid(spec: ExperimentSpec):
    return [(n, r) for n in spec.n for r in range(spec.reps)]


def _rows(kind, model, n, rep, metrics: dict) -> list:
    return [(kind, model, n, rep, k, v) for k, v in metrics.items()]


def _flatten(chunks) -> list:
    return [row for chunk in chunks for row in chunk]


def _invariant(name, violations: int) -> Check:
    return Check(name, violations == 0, int(violations), "== 0", "invariant")


def _mean(x) -> float:
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    return float(x.mean()) if len(x) else float("nan")


def _log(n) -> float:
    return math.log(n) if n > 1 else float("nan")


# -- experiments -------------------------------------------------------------

def run_height_scan(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)

    def task(key):
        n, rep = key
        pts = sample(model, n, replicate_rng(spec.seed, n, rep), spec.mode)
        y = pts.y_sequence()
        h = points_height(pts)
        m = dict(size=len(pts), height=h, ratio=h / (C_STAR * _log(n)),
                 records=records(y), lis=lis(y), lds=lds(y))
        return _rows(spec.kind, spec.model, n, rep, m)

    rec = RunRecord(spec, _flatten(_map(task, _grid(spec), spec.threads)))
    h, l, d, r = (rec.values(k) for k in ("height", "lis", "lds", "records"))
    rec.checks.append(_invariant("height_le_lis_plus_lds", int(np.sum(h > l + d))))
    rec.checks.append(_invariant("records_minus_one_le_height", int(np.sum(r - 1 > h))))
    means = [_mean(rec.values("ratio", n)) for n in sorted(spec.n)]
    if len(means) > 1:
        drops = int(sum(b < a for a, b in zip(means[:-1], means[1:])))
        rec.checks.append(Check("mean_ratio_nondecreasing", drops == 0, drops, "== 0 decreases"))
    lo, hi = RATIO_BAND
    for n, m in zip(sorted(spec.n), means):
        if n >= RATIO_BAND_FROM:
            rec.checks.append(Check(f"mean_ratio_band@{n}", lo <= m <= hi, m, f"in [{lo}, {hi}]"))
    return rec


def _psi_values(mu0, depth, count, seed, method, threads):
    """``count`` psi samples; unresolved words come back as NaN."""
    words = words_up_to(depth)

    def task(i):
        rng = replicate_rng(seed, 0, i)
        try:
            s = sample_psi(mu0, depth, rng, method=method)
        except PartialSampleError as exc:
            s = exc.partial
        return [s.values.get(w, np.nan) for w in words], s

    out = _map(task, list(range(count)), threads)
    return words, np.array([v for v, _ in out]), [s for _, s in out]


def run_ssc_scan(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)
    words = words_up_to(spec.depth)

    def task(key):
        n, rep = key
        pts = sample(model, n, replicate_rng(spec.seed, n, rep), spec.mode)
        m = {}
        if len(pts):
            t = bst_from_points(pts)
            for w in words:
                m[f"t[{w}]"] = subtree_fraction(t, w)
        else:
            m.update({f"t[{w}]": np.nan for w in words})
        ys = pts.y_sequence()
        for j in range(spec.k):
            m[f"y{j + 1}"] = ys[j] if j < len(ys) else np.nan
        if "t[0]" in m:
            m["t0_minus_y1"] = m["t[0]"] - m["y1"]
        return _rows(spec.kind, spec.model, n, rep, m)

    rec = RunRecord(spec, _flatten(_map(task, _grid(spec), spec.threads)))
    mu0 = model.left_derivative()
    if mu0 is None or not mu0.atomless or not spec.n:
        rec.extra["note"] = "no atomless left derivative: convergence checks skipped"
        return rec
    n_top = max(spec.n)
    if spec.depth >= 1:
        m = _mean(rec.values("t[0]", n_top))
        target = mu0.mean()
        rec.checks.append(Check(f"mean_t0@{n_top}", abs(m - target) <= 0.02, m, f"within 0.02 of {target:.6g}"))
    pw, psi, samples = _psi_values(mu0, spec.depth, spec.samples, spec.seed, spec.method, spec.threads)
    rec.extra["psi_samples"] = len(samples)
    rec.extra["psi_partial"] = int(sum(not s.complete for s in samples))
    for col, w in enumerate(pw):
        a = rec.values(f"t[{w}]", n_top)
        b = psi[:, col]
        ks = ks_two_sample(a[~np.isnan(a)], b[~np.isnan(b)])
        rec.checks.append(Check(f"ks_t_vs_psi[{w}]@{n_top}", ks < 0.05, ks, "< 0.05"))
    return rec


def run_verify_lemmas(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    results = run_suites(scale=spec.scale, seed=spec.seed)
    rows = []
    for res in results:
        rows.append((spec.kind, "-", 0, 0, f"{res.name}.cases", res.cases))
        rows.append((spec.kind, "-", 0, 0, f"{res.name}.failures", res.failures))
    rec = RunRecord(spec, rows)
    rec.checks.extend(_invariant(res.name, res.failures) for res in results)
    rec.extra["suites"] = [dict(name=r.name, cases=r.cases, failures=r.failures, seconds=r.seconds,
                                examples=[repr(e) for e in r.examples]) for r in results]
    return rec


def _records_threshold(n: int) -> float:
    """Mean minus 3 sigma of ``sqrt(n)/2`` Bernoulli(1 - 1/e) cells."""
    m = 0.5 * math.sqrt(n)
    p = 1 - math.exp(-1)
    return m * p - 3 * math.sqrt(m * p * (1 - p))


def run_deep_tree(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)

    def task(key):
        n, rep = key
        pts = sample(model, n, replicate_rng(spec.seed, n, rep), spec.mode)
        h, r = points_height(pts), records(pts)
        s = math.sqrt(n)
        return _rows(spec.kind, spec.model, n, rep,
                     dict(height=h, records=r, height_over_sqrt_n=h / s, records_over_sqrt_n=r / s))

    rec = RunRecord(spec, _flatten(_map(task, _grid(spec), spec.threads)))
    h, r = rec.values("height"), rec.values("records")
    rec.checks.append(_invariant("height_ge_records_minus_one", int(np.sum(h < r - 1))))
    for n in spec.n:
        thr = spec.threshold if spec.threshold is not None else _records_threshold(n)
        frac = float(np.mean(rec.values("records", n) >= thr))
        rec.checks.append(Check(f"records_ge_{thr:.4g}@{n}", frac >= 0.95, frac, ">= 0.95 of replicates"))
        m = _mean(rec.values("height_over_sqrt_n", n))
        rec.checks.append(Check(f"mean_height_over_sqrt_n@{n}", m < 3.0, m, "< 3"))
    return rec


def run_band_tree(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)
    flat = _parse("lebesgue")

    def task(key):
        n, rep = key
        h = points_height(sample(model, n, replicate_rng(spec.seed, n, rep), spec.mode))
        h0 = points_height(sample(flat, n, replicate_rng(spec.seed, n, rep, 1), spec.mode))
        ln = _log(n)
        return _rows(spec.kind, spec.model, n, rep,
                     dict(height=h, ratio=h / ln, lebesgue_height=h0, lebesgue_ratio=h0 / ln))

    rec = RunRecord(spec, _flatten(_map(task, _grid(spec), spec.threads)))
    beta = spec.beta
    thr = spec.threshold if spec.threshold is not None else (1 - beta) / (beta + 0.05) - 1.0
    for n in spec.n:
        frac = float(np.mean(rec.values("ratio", n) >= thr))
        rec.checks.append(Check(f"ratio_ge_{thr:.4g}@{n}", frac >= 0.90, frac, ">= 0.90 of replicates"))
        a, b = _mean(rec.values("ratio", n)), _mean(rec.values("lebesgue_ratio", n))
        rec.checks.append(Check(f"mean_ratio_exceeds_lebesgue@{n}", a > b, a - b, "> 0"))
    return rec


def _chain_loss(points, kept_idx) -> tuple[int, int]:
    """Height of ``points`` and how many points of its maximal chain fall
    outside ``kept_idx``."""
    t = bst_from_points(points)
    if t.size == 0:
        return -1, 0
    chain = points.x_order[maximal_chain_indices(t)]
    return t.height, int(np.count_nonzero(~np.isin(chain, kept_idx)))


def run_depoissonize(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)
    nan = float("nan")

    def task(key):
        n, rep = key
        c = depoissonization_coupling(model, n, spec.alpha, replicate_rng(spec.seed, n, rep))
        m = dict(n_plus=c.n_plus, n_minus=c.n_minus, valid_plus=c.valid_plus, valid_minus=c.valid_minus,
                 valid=c.valid,
                 h_outer=points_height(c.outer), h_middle=nan, h_inner=nan, lower_slack=nan, upper_slack=nan)
        if c.valid:
            h_out, lost_out = _chain_loss(c.outer, c.middle_in_outer)
            h_mid, lost_mid = _chain_loss(c.middle, c.inner_in_middle)
            h_in = points_height(c.inner)
            m.update(h_middle=h_mid, h_inner=h_in,
                     lower_slack=h_mid - (h_out - lost_out), upper_slack=h_in + lost_mid - h_mid)
        return _rows(spec.kind, spec.model, n, rep, m)

    rec = RunRecord(spec, _flatten(_map(task, _grid(spec), spec.threads)))
    lo, up = rec.values("lower_slack"), rec.values("upper_slack")
    ok = ~np.isnan(lo)
    rec.checks.append(_invariant("sandwich_violations", int(np.sum((lo[ok] < 0) | (up[ok] < 0)))))
    rec.extra["valid_replicates"] = int(ok.sum())
    for n in spec.n:
        for layer in ("plus", "minus"):
            invalid = 1.0 - float(np.mean(rec.values(f"valid_{layer}", n)))
            rec.checks.append(Check(f"invalid_{layer}_fraction@{n}", invalid < 0.01, invalid, "< 0.01"))
        hm, ho = rec.values("h_middle", n), rec.values("h_outer", n)
        gap = _mean(np.abs(hm - ho)) / _log(n)
        rec.checks.append(Check(f"mean_abs_fixed_minus_poisson_over_log_n@{n}", gap < 0.2, gap, "< 0.2"))
    return rec


def run_limit_sample(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    model = _parse(spec.model)
    mu0 = model.left_derivative()
    if mu0 is None:
        raise UsageError(f"model {spec.model!r} has no left derivative")
    if not mu0.atomless:
        raise UsageError(f"left derivative of {spec.model!r} has atoms; the limit tree is undefined")
    words, values, samples = _psi_values(mu0, spec.depth, spec.reps, spec.seed, spec.method, spec.threads)
    rows = []
    for rep, (vals, s) in enumerate(zip(values, samples)):
        m = {f"psi[{w}]": v for w, v in zip(words, vals)}
        m.update(insertions=s.insertions_used, complete=s.complete, additivity_violations=s.additivity_violations())
        rows.extend(_rows(spec.kind, spec.model, 0, rep, m))
    rec = RunRecord(spec, rows)
    viol = int(sum(s.additivity_violations() for s in samples))
    rec.checks.append(_invariant("additivity_violations", viol))
    finite = values[~np.isnan(values)]
    rec.checks.append(_invariant("psi_outside_unit_interval", int(np.sum((finite < 0) | (finite > 1)))))
    rec.checks.append(_invariant("psi_root_not_one", int(np.sum(values[:, 0] != 1.0))))
    rec.extra["partial_samples"] = int(sum(not s.complete for s in samples))
    return rec


def _stream_key(text: str) -> int:
    return zlib.crc32(text.encode())


def run_model_check(spec: ExperimentSpec) -> RunRecord:
    spec = spec.resolved()
    names = list(CATALOG) if spec.model == "all" else [spec.model]
    models = [_parse(m) for m in names]
    tasks = [(i, n, rep) for i in range(len(models)) for n in spec.n for rep in range(spec.reps)]

    def task(key):
        i, n, rep = key
        rng = replicate_rng(spec.seed, n, rep, _stream_key(names[i]))
        dev = marginal_check(models[i], spec.grid, n, rng)
        return [(spec.kind, names[i], n, rep, "max_marginal_deviation", dev)]

    rec = RunRecord(spec, _flatten(_map(task, tasks, spec.threads)))
    for name in names:
        dev = float(rec.values("max_marginal_deviation", model=name).max())
        rec.checks.append(Check(f"marginal_deviation[{name}]", dev < 0.005, dev, "< 0.005"))
    gammas = sorted({-2.0, 1.0, 5.0} | {m.gamma for m in models if isinstance(m, Mallows)})
    if any(isinstance(m, Mallows) for m in models):
        err = max(abs(mallows_marginal_integral(g, x) - 1.0) for g in gammas for x in (0.0, 0.3, 0.9))
        rec.checks.append(Check("mallows_marginal_quadrature", err < 1e-8, err, "< 1e-8", "invariant"))
    return rec


_RUNNERS = {
    "height-scan": run_height_scan,
    "ssc-scan": run_ssc_scan,
    "verify-lemmas": run_verify_lemmas,
    "deep-tree": run_deep_tree,
    "band-tree": run_band_tree,
    "depoissonize": run_depoissonize,
    "limit-sample": run_limit_sample,
    "model-check": run_model_check,
}


def run(spec: ExperimentSpec) -> RunRecord:
    """Resolve defaults, run the experiment, and time it."""
    spec = spec.resolved()
    t0 = time.perf_counter()
    rec = _RUNNERS[spec.kind](spec)
    rec.wall_clock = time.perf_counter() - t0
    return rec
