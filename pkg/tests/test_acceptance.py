"""The ten acceptance criteria, each at its stated tolerance and budget.

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary. Criteria 7 to 9 train several hundred networks and take
a few minutes each on one core.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import bipolar, central_fd, kink_mask, relative_error

from dam_lab.cli import main, rows_from_csv, rows_to_csv
from dam_lab.core import InteractionSpec, NetworkConfig, Precision, interaction_eval
from dam_lab.dynamics import (
    OverflowStats,
    classical_update,
    energy_differences,
    hebbian_weights,
    probe_overflow,
    update_neuron,
)
from dam_lab.experiments import (
    SweepGrid,
    aggregate,
    coarse_grid,
    fine_grid,
    optimal_cell,
    run_sweep,
)
from dam_lab.training import gradient, loss, tanh_arguments

FIXTURES = Path(__file__).parent / "fixtures" / "configs"


def test_criterion_01_homogeneity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    a = rng.uniform(0, 1e3, 10_000)
    a[a == 0] = 1e3  # half-open interval (0, 1e3]
    x = rng.uniform(-10, 10, 10_000)
    n = rng.integers(2, 31, 10_000)
    worst = 0.0
    for family in ("polynomial", "rectified"):
        for k in np.unique(n):
            sel = n == k
            spec = InteractionSpec(family, int(k))
            lhs = interaction_eval(spec, a[sel] * x[sel])
            rhs = a[sel] ** float(k) * interaction_eval(spec, x[sel])
            den = np.maximum(np.abs(rhs), np.finfo(float).tiny)
            err = np.where(rhs == lhs, 0.0, np.abs(lhs - rhs) / den)
            worst = max(worst, float(err.max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    report(1, ok, f"max rel err {worst:.2e} (tol 1e-10), {elapsed:.2f}s (< 1s)")
    assert ok


def test_criterion_02_update_invariance(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    checked = mismatches = 0
    for _ in range(500):
        N = int(rng.integers(2, 65))
        K = int(rng.integers(1, 17))
        n = int(rng.choice([2, 3, 5, 10, 20]))
        family = str(rng.choice(["polynomial", "rectified"]))
        mem = rng.uniform(-1, 1, (K, N))
        z = bipolar(rng, N)
        spec = InteractionSpec(family, n)
        orig = NetworkConfig("original", N, spec)
        mod = NetworkConfig("modified", N, spec)
        eo = energy_differences(mem, z, orig)
        em = energy_differences(mem, z, mod)
        for i in np.flatnonzero((np.abs(eo) > 1e-12) & (np.abs(em) > 1e-12)):
            checked += 1
            if update_neuron(mem, z, i, orig) != update_neuron(mem, z, i, mod):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and checked > 0 and elapsed < 30
    report(2, ok, f"{mismatches} disagreements over {checked} neurons, {elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_03_learning_invariance(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst_arg = worst_loss = 0.0
    for _ in range(200):
        N = int(rng.integers(3, 13))
        K = int(rng.integers(1, 5))
        P = int(rng.integers(1, 5))
        n = int(rng.integers(2, 8))
        family = str(rng.choice(["polynomial", "rectified"]))
        spec = InteractionSpec(family, n)
        mem = rng.uniform(-1, 1, (K, N))
        Z = bipolar(rng, P, N)
        T_orig = float(rng.uniform(0.5, 3.0)) * N
        beta_prime = T_orig ** -n
        beta = beta_prime ** (1.0 / n)
        a_orig = tanh_arguments(mem, Z, spec, 1.0, beta_prime)
        a_mod = tanh_arguments(mem, Z, spec, beta, 1.0)
        den = np.maximum(np.abs(a_orig), 1e-300)
        worst_arg = max(worst_arg, float(np.max(np.where(a_orig == a_mod, 0,
                                                         np.abs(a_orig - a_mod) / den))))
        # the same pair through the public configs: T_mod = T_orig / N gives beta = 1/T_orig
        l_orig = loss(mem, Z, NetworkConfig("original", N, spec, T_orig))
        l_mod = loss(mem, Z, NetworkConfig("modified", N, spec, T_orig / N))
        worst_loss = max(worst_loss, abs(l_orig - l_mod) / max(abs(l_orig), 1e-300))
    elapsed = time.perf_counter() - t0
    ok = worst_arg <= 1e-10 and worst_loss <= 1e-9 and elapsed < 30
    report(3, ok, f"tanh-arg rel err {worst_arg:.2e} (1e-10), loss rel err {worst_loss:.2e} "
                  f"(1e-9), {elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_04_gradient_check(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    cases = {
        "polynomial": ("modified", 3, 0.3),
        "rectified": ("modified", 4, 0.2),
        "leaky": ("modified", 3, 0.2),
        "exponential": ("modified", None, 0.5),
    }
    worst = {}
    for family, (form, n, T) in cases.items():
        worst[family] = 0.0
        for trial in range(6):
            N = int(rng.integers(4, 17))
            K = int(rng.integers(1, 5))
            P = int(rng.integers(1, 5))
            cfg = NetworkConfig(form, N, InteractionSpec(family, n or 2), T)
            mem = rng.uniform(-0.6, 0.6, (K, N))
            Z = bipolar(rng, P, N)
            g = gradient(mem, Z, cfg)
            fd = central_fd(mem, Z, cfg, h=1e-5)
            keep = ~kink_mask(mem, Z, cfg) if family in ("rectified", "leaky") else \
                np.ones(g.shape, bool)
            if np.abs(g).max() == 0 or not keep.any():
                continue
            worst[family] = max(worst[family], float(relative_error(g, fd)[keep].max()))
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-5 and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(4, ok, f"max rel err {detail} (tol 1e-5), {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_05_overflow_reproduction(report):
    t0 = time.perf_counter()
    big = probe_overflow(10_000, 30)
    orig = probe_overflow(200, 30, Precision.SINGLE, "original")
    mod = probe_overflow(200, 30, Precision.SINGLE, "modified")
    elapsed = time.perf_counter() - t0
    ok = (abs(big.powered_value_log10 - 120) < 1e-9 and orig.overflows
          and orig.nonfinite_count > 0 and not mod.overflows and mod.nonfinite_count == 0
          and mod.max_similarity <= 1.0 and elapsed < 1.0)
    report(5, ok, f"log10 N^n = {big.powered_value_log10:g}; original/single nonfinite="
                  f"{orig.nonfinite_count}; modified/single nonfinite={mod.nonfinite_count}, "
                  f"max pre-power |x|={mod.max_similarity:g}; {elapsed:.2f}s (< 1s)")
    assert ok


def test_criterion_06_classical_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    compared = mismatches = 0
    for _ in range(20):
        N = int(rng.integers(8, 60))
        P = int(rng.integers(1, 8))
        states = bipolar(rng, P, N)
        W = hebbian_weights(states)
        cfg = NetworkConfig("original", N, InteractionSpec("polynomial", 2))
        for _ in range(5):
            probe = bipolar(rng, N)
            for i in range(N):
                compared += 1
                modern = update_neuron(states.astype(float), probe, i, cfg)
                if modern != classical_update(W, probe, i, zero_diagonal=True):
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report(6, ok, f"{mismatches} disagreements over {compared} neuron updates "
                  f"(100 probes, 20 nets), {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_07_desk_scale_recall(report):
    t0 = time.perf_counter()
    grid = SweepGrid("modified", "polynomial", (2, 5, 10, 20), (0.5,), (0.9,), repeats=5,
                     base_seed=7, patterns=20, dim=100, train={"epochs": 500})
    rows = run_sweep(grid)
    elapsed = time.perf_counter() - t0
    good = {n: sum(r.mean_recall_distance <= 0.2 for r in rows if r.n == n)
            for n in grid.vertices}
    ok = all(v >= 4 for v in good.values()) and elapsed < 600
    detail = ", ".join(f"n={n}: {v}/5" for n, v in good.items())
    report(7, ok, f"seeds with distance <= 0.2: {detail} (need 4/5), {elapsed:.0f}s (< 600s)")
    assert ok


def test_criterion_08_optimal_region_stability(report):
    t0 = time.perf_counter()
    grid = fine_grid("modified", vertices=(10, 20), repeats=5, base_seed=8)
    rows = run_sweep(grid)
    elapsed = time.perf_counter() - t0
    l10, t10 = optimal_cell(rows, 10)
    l20, t20 = optimal_cell(rows, 20)
    ok = abs(l10 - l20) <= 1 and abs(t10 - t20) <= 1 and elapsed < 1800
    lrs, its = grid.learning_rates, grid.inverse_temperatures
    report(8, ok, f"argmin n=10 (lr {lrs[l10]:g}, 1/T {its[t10]:g}); n=20 (lr {lrs[l20]:g}, "
                  f"1/T {its[t20]:g}); step distance ({abs(l10 - l20)}, {abs(t10 - t20)}) "
                  f"<= 1; {elapsed:.0f}s (< 1800s)")
    assert ok


def test_criterion_09_original_degradation(report):
    t0 = time.perf_counter()
    grid = coarse_grid("original", vertices=(20,), repeats=5, base_seed=9)
    rows = run_sweep(grid)
    elapsed = time.perf_counter() - t0
    lrs, its, table = aggregate(rows, 20)
    low, high = float(np.mean(table[:, 0])), float(np.mean(table[:, -1]))
    overflow = sum(r.overflow_nonfinite_count for r in rows)
    finite = all(r.overflow_nonfinite_count == 0 for r in rows)
    ok = high > low and finite
    report(9, ok, f"mean distance lr={lrs[-1]:g} column {high:.3f} vs lr={lrs[0]:g} column "
                  f"{low:.3f} (need strictly greater); nonfinite events {overflow} "
                  f"(need 0); {elapsed:.0f}s")
    assert ok


def _cli(argv):
    return main([str(a) for a in argv])


def test_criterion_10_determinism_and_cli_contract(report, tmp_path, capsys):
    problems = []
    sweep_cfg = FIXTURES / "valid_sweep_tiny.json"
    outputs = []
    for k, jobs in enumerate((1, 2, 1)):
        out = tmp_path / f"sweep{k}.csv"
        if _cli(["sweep", sweep_cfg, "-o", out, "--jobs", jobs]) != 0:
            problems.append(f"sweep run {k} failed")
        outputs.append(out.read_bytes() if out.exists() else b"")
    if len(set(outputs)) != 1:
        problems.append("sweep CSVs differ between runs")
    text = outputs[0].decode()
    rows = rows_from_csv(text)
    if rows_to_csv(rows) != text or len(rows) != 20:
        problems.append("CSV does not round-trip")

    expected = {}
    for path in sorted(FIXTURES.glob("*.json")):
        cmd = "sweep" if "sweep" in path.name else "train"
        want = 0 if path.name.startswith("valid_") else 2
        out = tmp_path / (path.stem + (".csv" if cmd == "sweep" else ".mem.json"))
        expected[(cmd, path.name)] = (want, _cli([cmd, path, "-o", out, "--jobs", 1]
                                                 if cmd == "sweep" else [cmd, path, "-o", out]))
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    expected[("train", "missing config")] = (1, _cli(["train", tmp_path / "none.json", "-o",
                                                      tmp_path / "m.json"]))
    expected[("train", "unwritable output")] = (
        1, _cli(["train", FIXTURES / "valid_train_small.json", "-o", blocker / "x" / "m.json"]))
    expected[("render", "missing csv")] = (1, _cli(["render", tmp_path / "no.csv", "-o",
                                                    tmp_path / "h.svg"]))
    expected[("render", "absent vertex")] = (2, _cli(["render", tmp_path / "sweep0.csv",
                                                      "--vertex", 9, "-o", tmp_path / "h.svg"]))
    expected[("probe-overflow", "bad vertex")] = (2, _cli(["probe-overflow", "--dim", 10,
                                                           "--vertex", 1]))
    expected[("relax", "bad probe")] = (2, _cli(["relax", tmp_path / "valid_train_small.mem.json",
                                                 "--probe", "1,-1"]))
    capsys.readouterr()
    for key, (want, got) in expected.items():
        if want != got:
            problems.append(f"{key}: exit {got}, expected {want}")

    ok = not problems
    report(10, ok, f"3 sweep runs byte-identical, CSV round-trip, {len(expected)} exit-code "
                   f"cases" + ("" if ok else f"; problems: {problems}"))
    assert ok, problems
