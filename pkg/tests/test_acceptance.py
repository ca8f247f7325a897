"""Acceptance criteria, one test each.

Every test records a one-line verdict in ``OUTCOMES``; the conftest hook
prints them all at the end of the run.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from cp3o.divergence import energy_divergence, energy_stat, gof_eval, ks_divergence, ks_stat
from cp3o.evaluation import ScenarioSpec, adjusted_rand, generate_scenario, run_benchmark
from cp3o.model import Cp3oConfig, GofMetric, Segmentation, TimeSeries
from cp3o.search import exhaustive_best_segmentation, run_cp3o, select_num_changes

OUTCOMES = {}


def record(num, passed, detail):
    OUTCOMES[num] = (bool(passed), detail)
    print(f"criterion {num}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def random_instance(rng, max_T=60):
    """A short series with an optional change, a gap ``w`` and a metric."""
    T = int(rng.integers(20, max_T + 1))
    w = int(rng.integers(2, T // 4 + 1))
    tau = int(rng.integers(w + 1, T - w + 2))
    data = rng.normal(size=T)
    data[tau - 1:] = data[tau - 1:] * rng.uniform(0.5, 3) + rng.uniform(-2, 2)
    if rng.random() < 0.3:
        data = np.round(data)
    kind = rng.choice(["energy-complete", "energy", "ks", "ks-windowed"])
    alpha = float(rng.uniform(0.3, 2.0)) if kind.startswith("energy") else 1.0
    return TimeSeries(data), w, GofMetric(kind, alpha)


def test_c01_single_change_exact():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        seq, w, metric = random_instance(rng)
        result = run_cp3o(seq, Cp3oConfig(K=1, w=w, metric=metric))
        value, seg = exhaustive_best_segmentation(seq, metric, 1, w)
        if result.gof_curve[0] != value or result.all_segmentations[1] != seg:
            mismatches += 1
    elapsed = time.perf_counter() - start
    record(1, mismatches == 0 and elapsed < 10,
           f"single-change exactness: {mismatches}/100 mismatches, {elapsed:.2f} s (< 10 s)")


def test_c02_dominance_and_legality():
    rng = np.random.default_rng(202)
    violations = []
    for i in range(50):
        seq, w, metric = random_instance(rng)
        K = int(rng.integers(2, 6))
        result = run_cp3o(seq, Cp3oConfig(K=K, w=w, metric=metric))
        for k, seg in result.all_segmentations.items():
            if not (seg.is_legal(w) and len(seg) == k):
                violations.append(f"instance {i}: illegal {k}-segmentation {seg.change_points}")
        for k in (1, 2):
            if k > result.K:
                continue
            value, _ = exhaustive_best_segmentation(seq, metric, k, w)
            if not value >= result.gof_curve[k - 1]:
                violations.append(f"instance {i}, k={k}: {result.gof_curve[k - 1]} > {value}")
    record(2, not violations,
           f"dominance and legality on 50 instances: {len(violations)} violations"
           + (f" (first: {violations[0]})" if violations else ""))


def test_c03_closed_forms():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    X = rng.normal(0.0, 1.0, 20000)
    Y = rng.normal(1.0, 1.0, 20000)
    e = energy_stat(X, Y, 1.0)
    d = ks_stat(X, Y)
    elapsed = time.perf_counter() - start
    ok = abs(e - 0.5415) <= 0.05 and abs(d - 0.7659) <= 0.02 and elapsed < 30
    record(3, ok, f"closed forms: energy {e:.4f} (0.5415 +/- 0.05; exact "
                  f"{oracles.energy_normal_shift(1.0):.4f}), KS {d:.4f} (0.7659 +/- 0.02), "
                  f"{elapsed:.2f} s (< 30 s)")


def test_c04_unique_maximizer():
    rng = np.random.default_rng(404)
    T, gamma = 4000, 0.5
    grid = np.round(np.arange(0.01, 1.0, 0.01), 2)
    target = grid[np.argmin(np.abs(grid - gamma))]
    hits = {"energy": 0, "ks": 0}
    for _ in range(100):
        Z = rng.normal(size=T)
        Z[int(gamma * T):] += 3.0
        for name, fn in (("energy", energy_divergence), ("ks", ks_divergence)):
            scores = [fn(Z[:int(round(eta * T))], Z[int(round(eta * T)):]) for eta in grid]
            hits[name] += grid[int(np.argmax(scores))] == target
    record(4, min(hits.values()) >= 95,
           f"maximizer at the true split: energy {hits['energy']}/100, KS {hits['ks']}/100 (>= 95)")


@pytest.mark.slow
def test_c05_simulation_gaussian():
    cfg = Cp3oConfig(K=5, w=30, metric=GofMetric.energy(1.0))
    start = time.perf_counter()
    summary = run_benchmark(ScenarioSpec("gaussian", 400, seed=505), cfg, 100)
    elapsed = time.perf_counter() - start
    ok = summary.e2t <= 30 and 2.0 <= summary.est_k <= 3.2 and elapsed <= 120
    record(5, ok, f"Gaussian T=400: mean E2T {summary.e2t:.2f} (<= 30), mean k "
                  f"{summary.est_k:.2f} (in [2, 3.2]), {elapsed:.1f} s (<= 120 s)")


@pytest.mark.slow
def test_c06_heavy_tail_ks():
    cfg = Cp3oConfig(K=5, w=60, metric=GofMetric.ks())
    summary = run_benchmark(ScenarioSpec("heavytail", 1600, seed=606), cfg, 50)
    ok = 2.5 <= summary.est_k <= 3.5 and summary.rand >= 0.8
    record(6, ok, f"heavy-tail KS T=1600: mean k {summary.est_k:.2f} (in [2.5, 3.5]), "
                  f"mean Rand {summary.rand:.3f} (>= 0.8)")


def test_c07_pruning_decay():
    cfg = Cp3oConfig(K=5, w=30, metric=GofMetric.energy(1.0))
    seeds = np.random.SeedSequence(707).generate_state(20)
    ratios = []
    for seed in seeds:
        seq, _ = generate_scenario(ScenarioSpec("gaussian", 400, seed=int(seed)))
        stats = run_cp3o(seq, cfg).prune_stats[400]
        ratios.append(stats[3:] / stats[1])
    worst = float(np.max(np.mean(ratios, axis=0)))
    record(7, worst <= 0.2,
           f"pruning decay: largest mean |S_T(k)|/|S_T(1)| over k >= 3 is {worst:.3f} (<= 0.2)")


def test_c08_incomplete_scaling():
    rng = np.random.default_rng(808)
    metric = GofMetric.energy(1.0, 29)
    series = {n: TimeSeries(rng.normal(size=2 * n)) for n in (2000, 4000)}
    times = {n: [] for n in series}
    for n, seq in series.items():
        gof_eval(metric, seq, 1, n + 1, 2 * n + 1)    # warm-up
    for _ in range(20):
        for n, seq in series.items():
            t0 = time.perf_counter()
            gof_eval(metric, seq, 1, n + 1, 2 * n + 1)
            times[n].append(time.perf_counter() - t0)
    ratio = np.median(times[4000]) / np.median(times[2000])
    record(8, ratio <= 2.5, f"incomplete energy cost ratio n=4000 vs 2000: {ratio:.2f} (<= 2.5)")


def test_c09_metric_oracles():
    rng = np.random.default_rng(909)
    ari_bad = 0
    for _ in range(200):
        T = int(rng.integers(2, 201))
        pts = [tuple(sorted(rng.choice(np.arange(2, T + 1), size=int(rng.integers(0, min(T - 1, 8) + 1)),
                                       replace=False).tolist())) for _ in range(2)]
        got = adjusted_rand(Segmentation(pts[0], T), Segmentation(pts[1], T), T)
        ari_bad += got != oracles.adjusted_rand_pairs(pts[0], pts[1], T)

    knee_hits = 0
    for _ in range(100):
        K = int(rng.integers(5, 11))
        c = int(rng.integers(2, K))
        s1 = rng.uniform(1, 3)
        s2 = s1 * rng.uniform(0.05, 0.3)
        k = np.arange(1, K + 1)
        y = np.where(k <= c, s1 * (k - 1), s1 * (c - 1) + s2 * (k - c))
        y = y + rng.uniform(-0.02, 0.02, K) * (y[-1] - y[0])
        knee_hits += select_num_changes(y)[0] == c
    record(9, ari_bad == 0 and knee_hits >= 95,
           f"adjusted Rand oracle mismatches {ari_bad}/200 (0), knee recovered {knee_hits}/100 (>= 95)")


def _cli(args, tmp_path, name):
    out = tmp_path / name
    subprocess.run([sys.executable, "-m", "cp3o.cli", *map(str, args), "--output", str(out)],
                   check=True, capture_output=True)
    return out.read_bytes()


def _strip_runtime_json(raw):
    obj = json.loads(raw)
    obj.pop("runtime_s")
    return json.dumps(obj, sort_keys=True)


def _strip_runtime_csv(raw):
    lines = raw.decode().splitlines()
    col = lines[0].split(",").index("mean_runtime_s")
    return [",".join(f for i, f in enumerate(line.split(",")) if i != col) for line in lines]


def test_c10_cli_determinism(tmp_path):
    rng = np.random.default_rng(1010)
    data = np.concatenate([rng.normal(0, 1, (80, 2)), rng.normal(2, 1, (80, 2))])
    src = tmp_path / "in.csv"
    np.savetxt(src, np.exp(data / 10), delimiter=",", header="a,b", comments="")

    runs = {
        "detect-json": (["detect", "--input", src, "--transform", "log", "--min-size", 15,
                         "--seed", 3], _strip_runtime_json),
        "detect-csv": (["detect", "--input", src, "--min-size", 15, "--format", "csv"], bytes),
        "simulate": (["simulate", "--scenario", "gaussian", "heavytail", "--T", 200,
                      "--min-size", 20, "--trials", 2, "--metric", "energy", "ks",
                      "--seed", 3], _strip_runtime_csv),
        "prune-stats": (["prune-stats", "--scenario", "gaussian", "--T", 300, "--min-size", 25,
                         "--seed", 3], bytes),
    }
    differing = []
    for name, (args, normalize) in runs.items():
        first = normalize(_cli(args, tmp_path, f"{name}-1"))
        second = normalize(_cli(args, tmp_path, f"{name}-2"))
        if first != second:
            differing.append(name)
    record(10, not differing,
           f"CLI determinism over {len(runs)} runs: "
           + ("all identical" if not differing else f"differs: {', '.join(differing)}"))
