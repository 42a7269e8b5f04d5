"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
Tolerances are fixed here and are never tuned to make a run pass.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from quorum_rdv.cli import SweepSpec, main, run_matrix
from quorum_rdv.metrics_report import derive_metrics
from quorum_rdv.quorum_core import (
    QuorumSelection,
    Scheme,
    brute_force_intersection_stats,
    build_grid,
    guaranteed_rdv_count,
    intersect,
    quorum_slots,
    random_selection,
)
from quorum_rdv.sim_engine import SLOT_DURATION_MS, ExperimentConfig, World, run

SCHEMES = (Scheme.ONE_BY_ONE, Scheme.TWO_BY_ONE, Scheme.TWO_BY_TWO)
P_SWEEP = tuple(round(0.1 * i, 1) for i in range(1, 11))

# trend and sandwich suites: 5 seeds of 100k slots per point
TREND_SLOTS = 100_000
TREND_SEEDS = (1, 2, 3, 4, 5)


def expected_counts(n):
    return {
        Scheme.ONE_BY_ONE: {1: 2, 2: n, 3: 2 * n - 1},
        Scheme.TWO_BY_ONE: {1: 4, 2: n + 2, 3: 2 * n, 4: 3 * n - 2},
        Scheme.TWO_BY_TWO: {1: 8},
    }


def test_c01_case_counts():
    start = time.perf_counter()
    problems = []
    for n in (3, 4, 5):
        for scheme, cases in expected_counts(n).items():
            stats = brute_force_intersection_stats(n, scheme, scheme)
            by_label = {}
            for case, mm in stats.items():
                if case.label is not None:
                    by_label.setdefault(case.label, []).append(mm)
            for label, count in cases.items():
                found = by_label.get(label)
                if not found:
                    # two disjoint row pairs need n >= 4
                    if n == 3 and (scheme, label) in {(Scheme.TWO_BY_ONE, 1), (Scheme.TWO_BY_TWO, 1)}:
                        continue
                    problems.append(f"n={n} {scheme.value} case {label} missing")
                    continue
                for mm in found:
                    if not mm["min"] == mm["max"] == count:
                        problems.append(f"n={n} {scheme.value} case {label}: {mm} != {count}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 5.0
    record_criterion(1, "case-count exactness n=3..5", ok, f"{elapsed:.2f}s; {problems[:3]}")
    assert ok, problems


def test_c02_fixture_geometry():
    n = 4
    hosts = [QuorumSelection({0}, {0}), QuorumSelection({1}, {2}), QuorumSelection({2}, {1})]
    quorums = [set(quorum_slots(h, n)) for h in hosts]
    want = [{0, 1, 2, 3, 4, 8, 12}, {2, 4, 5, 6, 7, 10, 14}, {1, 5, 8, 9, 10, 11, 13}]
    inter = [set(intersect(quorums[0], quorums[1])), set(intersect(quorums[0], quorums[2])),
             set(intersect(quorums[1], quorums[2]))]
    grid17 = build_grid(17)
    ok = (quorums == want and inter == [{2, 4}, {1, 8}, {5, 10}]
          and grid17.grid_side == 5 and grid17.channel_of(17) == 1)
    record_criterion(2, "host quorums, intersections and N=17 mapping", ok)
    assert ok


def test_c03_rate_law():
    pair = (QuorumSelection({0}, {1}), QuorumSelection({2}, {3}))
    assert len(intersect(quorum_slots(pair[0], 4), quorum_slots(pair[1], 4))) == 2
    details, ok = [], True
    for p in (0.1, 0.5, 0.9):
        cfg = ExperimentConfig(num_channels=16, scheme=Scheme.CUSTOM, fixed_selections=(pair,),
                               p_idle=p, total_slots=800_000, seed=31)
        t0 = time.perf_counter()
        stats = run(cfg)
        rate = stats.successes / stats.slots_run
        good = abs(rate - 2 / 16 * p) <= 0.005
        ok &= good
        details.append(f"p={p}: {rate:.5f} vs {2 / 16 * p:.5f} ({time.perf_counter() - t0:.2f}s)")
    record_criterion(3, "rate law 1x1 case 1, 800k slots", ok, "; ".join(details))
    assert ok


def test_c04_mttr_guarantee():
    ok, details = True, []
    for n in (3, 4, 5):
        for scheme in SCHEMES + (Scheme.ADAPTIVE,):
            cfg = ExperimentConfig(num_channels=n * n, num_pairs=10_000, scheme=scheme,
                                   p_idle=1.0, total_slots=n * n * 3, seed=n)
            stats = run(cfg)
            worst = int(stats.ttr_samples.max())
            good = worst <= n * n and len(stats.ttr_samples) == 10_000 * 3
            ok &= good
            details.append(f"n={n} {scheme.value} max={worst}")
    # per-pair success count each cycle, 1x1, per-cycle reselection
    n = 4
    cfg = ExperimentConfig(num_channels=16, num_pairs=10_000, scheme=Scheme.ONE_BY_ONE,
                           p_idle=1.0, total_slots=16 * 2, seed=99)
    world = World(cfg)
    counts = np.zeros((2, cfg.num_pairs), dtype=int)
    for slot in range(cfg.total_slots):
        ev = world.step_slot(slot)
        np.add.at(counts[slot // 16], ev.successes, 1)
    least = int(counts.min())
    ok &= least >= 2
    details.append(f"min successes per pair per cycle={least}")
    record_criterion(4, "TTR <= n^2 at p=1 and >=2 successes per cycle", ok, "; ".join(details))
    assert ok


def test_c05_energy_law():
    ok, details = True, []
    for n in (3, 4, 5, 6):
        for scheme, want in ((Scheme.ONE_BY_ONE, 2 * n - 1), (Scheme.TWO_BY_ONE, 3 * n - 2),
                             (Scheme.TWO_BY_TWO, 4 * n - 4)):
            sel = random_selection(scheme, n, np.random.default_rng(n))
            cfg = ExperimentConfig(num_channels=n * n, num_pairs=3, scheme=scheme, p_idle=0.5,
                                   total_slots=n * n * 7, seed=1)
            stats = run(cfg)
            per_node = stats.active_slot_count / (2 * 3 * 7)
            good = len(quorum_slots(sel, n)) == want and per_node == want
            ok &= good
            if not good:
                details.append(f"n={n} {scheme.value}: {per_node} != {want}")
    pair = (QuorumSelection({0}, {1}), QuorumSelection({2}, {3}))
    cfg = ExperimentConfig(num_channels=16, scheme=Scheme.CUSTOM, fixed_selections=(pair,),
                           p_idle=1.0, total_slots=16 * 1000, seed=1)
    energy = derive_metrics(run(cfg), cfg).energy_per_rdv
    ok &= energy == 7.0
    details.append(f"energy per success n=4: {energy}")
    record_criterion(5, "active slots per cycle and energy per success", ok, "; ".join(details))
    assert ok


def test_c06_forced_blocking_law():
    spec = SweepSpec(grid_sides=(3, 4, 5), p_idle=(0.2, 0.5, 0.9), pairs=(4,),
                     schemes=SCHEMES + (Scheme.ADAPTIVE,), seeds=(6,), slots=800_000)
    rows = run_matrix(spec)
    worst, failures = 0.0, []
    for row in rows:
        want = (1 - row.p_idle) / row.p_idle
        rel = abs(row.forced_blocking_ratio - want) / want
        worst = max(worst, rel)
        if rel > 0.05:
            failures.append(f"{row.scheme} n={row.n} p={row.p_idle}: {row.forced_blocking_ratio:.4f}")
    ok = not failures
    record_criterion(6, "forced blocking = (1-p)/p within 5%", ok,
                     f"{len(rows)} cells, worst rel err {worst:.4f}; {failures[:3]}")
    assert ok


@pytest.fixture(scope="module")
def trend_rows():
    spec = SweepSpec(grid_sides=(4,), p_idle=P_SWEEP, pairs=(26,),
                     schemes=SCHEMES + (Scheme.ADAPTIVE,), seeds=TREND_SEEDS, slots=TREND_SLOTS)
    return run_matrix(spec)


def curve(rows, scheme, metric):
    """Per-p mean and standard error over seeds."""
    means, ses = [], []
    for p in P_SWEEP:
        vals = np.array([getattr(r, metric) for r in rows if r.scheme == scheme and r.p_idle == p],
                        dtype=float)
        means.append(vals.mean())
        ses.append(vals.std(ddof=1) / math.sqrt(len(vals)))
    return np.array(means), np.array(ses)


def monotone(means, ses, direction):
    """Indices where a step goes the wrong way by more than two standard errors."""
    bad = []
    for i in range(len(means) - 1):
        step = (means[i + 1] - means[i]) * direction
        noise = 2 * math.hypot(ses[i], ses[i + 1])
        if step < -noise:
            bad.append(i)
    return bad


def test_c07_trend_suite(trend_rows):
    problems = []
    for scheme in SCHEMES:
        s = scheme.value
        for metric, direction in (("avg_rdv_per_slot", 1), ("avg_ttr_slots", -1),
                                  ("forced_blocking_ratio", -1)):
            means, ses = curve(trend_rows, s, metric)
            bad = monotone(means, ses, direction)
            if bad:
                problems.append(f"{s} {metric} at p={[P_SWEEP[i] for i in bad]}")
        fb, _ = curve(trend_rows, s, "forced_blocking_ratio")
        if not fb[-1] < fb[0]:
            problems.append(f"{s} forced blocking not decreasing overall")
    m11, se11 = curve(trend_rows, "1x1", "avg_rdv_per_slot")
    m21, se21 = curve(trend_rows, "2x1", "avg_rdv_per_slot")
    m22, se22 = curve(trend_rows, "2x2", "avg_rdv_per_slot")
    for i, p in enumerate(P_SWEEP):
        if not m22[i] >= m21[i] >= m11[i]:
            problems.append(f"ordering at p={p}: {m11[i]:.4f} {m21[i]:.4f} {m22[i]:.4f}")
    ok = not problems
    record_criterion(7, "trend suite n=4, 26 pairs, 5 seeds", ok, "; ".join(problems[:4]))
    assert ok, problems


def test_c08_adaptive_sandwich(trend_rows):
    ma, sea = curve(trend_rows, "adaptive", "avg_rdv_per_slot")
    m21, _ = curve(trend_rows, "2x1", "avg_rdv_per_slot")
    m22, _ = curve(trend_rows, "2x2", "avg_rdv_per_slot")
    ea, see = curve(trend_rows, "adaptive", "energy_per_rdv")
    e22, _ = curve(trend_rows, "2x2", "energy_per_rdv")
    problems = []
    for i, p in enumerate(P_SWEEP):
        eps = 2 * sea[i]
        if not m21[i] - eps <= ma[i] <= m22[i] + eps:
            problems.append(f"rate p={p}: {ma[i]:.5f} not in [{m21[i]:.5f}, {m22[i]:.5f}] +- {eps:.5f}")
        eps_e = 2 * see[i]
        if not ea[i] <= e22[i] + eps_e:
            problems.append(f"energy p={p}: {ea[i]:.4f} > {e22[i]:.4f} + {eps_e:.4f}")
    ok = not problems
    record_criterion(8, "adaptive between 2x1 and 2x2, energy <= 2x2", ok, "; ".join(problems[:4]))
    assert ok, problems


def test_c09_unit_check(trend_rows):
    with_ttr = [r for r in trend_rows if r.avg_ttr_slots is not None]
    ok = bool(with_ttr) and all(r.avg_ttr_ms == r.avg_ttr_slots * SLOT_DURATION_MS for r in with_ttr)
    ok &= SLOT_DURATION_MS == 0.384
    record_criterion(9, "avg_ttr_ms = avg_ttr_slots x 0.384", ok, f"{len(with_ttr)} rows")
    assert ok


def test_c10_determinism(tmp_path):
    argv = ["--grid", "3,4", "--p-idle", "0.2,0.7", "--pairs", "8", "--slots", "20000",
            "--seed", "5", "--contention"]
    outputs = []
    for name in ("a", "b"):
        assert main(argv + ["--out", str(tmp_path / name)]) == 0
        outputs.append((tmp_path / name / "results.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0].splitlines()) == 1 + 4 * 2 * 2
    record_criterion(10, "identical argv gives byte-identical CSV", ok)
    assert ok
