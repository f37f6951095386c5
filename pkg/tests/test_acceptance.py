"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` (a PASS/FAIL line per
criterion is printed in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import filecmp
import math
import os
import sys
import time

import numpy as np
import pytest

from ddkelly.cli import main as cli_main
from ddkelly.config import ExperimentConfig, ModelConfig
from ddkelly.experiments import (
    run_drawdown_race, run_growth, run_numeraire_test, run_oscillation, run_turnpike,
    run_zeta_law,
)
from ddkelly.market import gbm_preset, simulate_batch
from ddkelly.paths import TimeGrid, relative_drawdown
from ddkelly.transform import az_forward, az_inverse

RESULTS = {}


def record(key, ok, detail, elapsed, limit):
    in_time = limit is None or elapsed < limit
    RESULTS[key] = (ok and in_time, f"{detail}; {elapsed:.1f}s" + ("" if in_time else f" > {limit}s"))
    return RESULTS[key][0]


def _corpus():
    return simulate_batch(gbm_preset(), TimeGrid(0.01, 1000), 1000, seed=11).numeraire.wealth


_NUM = {}


def _numeraire_report():
    if "r" not in _NUM:
        t0 = time.perf_counter()
        cfg = ExperimentConfig(model=ModelConfig("gbm"), alpha=0.5, level=1.0, n_paths=5000,
                               seed=3, dt=0.01, t_max=60.0)
        _NUM["r"] = run_numeraire_test(cfg)
        _NUM["t"] = time.perf_counter() - t0
    return _NUM["r"], _NUM["t"]


def criterion_1():
    t0 = time.perf_counter()
    x = _corpus()
    errs = {}
    for a in (0.1, 0.5, 0.9):
        lhs = relative_drawdown(az_forward(x, a))
        errs[a] = float(np.max(np.abs(lhs - (a + (1 - a) * relative_drawdown(x)))))
    ok = all(e < 1e-12 for e in errs.values())
    return record("C1 drawdown identity", ok, f"max abs err {max(errs.values()):.2e}",
                  time.perf_counter() - t0, 10)


def criterion_2():
    t0 = time.perf_counter()
    x = _corpus()
    worst = 0.0
    for a in (0.1, 0.5, 0.9):
        back = az_inverse(az_forward(x, a), a)
        worst = max(worst, float(np.max(np.abs(back - x) / x)))
    for a, b in ((0.1, 0.5), (0.5, 0.5), (0.3, 0.9), (0.9, 0.1)):
        g = 1 - (1 - a) * (1 - b)
        lhs = az_forward(az_forward(x, a), b)
        rhs = az_forward(x, g)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / rhs)))
    return record("C2 round trip and composition", worst < 1e-10, f"max rel err {worst:.2e}",
                  time.perf_counter() - t0, 10)


def criterion_3():
    rep, elapsed = _numeraire_report()
    rows = [r for r in rep.rows if r[0].startswith("err_")]
    ok = len(rows) == 3 and all(r[1] <= 3 * r[2] for r in rows)
    detail = ", ".join(f"{r[0]} {r[1]:+.4f} (se {r[2]:.4f})" for r in rows)
    return record("C3 numeraire property at tau_1", ok, detail, elapsed, 120)


def criterion_4():
    rep, elapsed = _numeraire_report()
    rows = [r for r in rep.rows if r[0].startswith("phi_")]
    ok = len(rows) == 3 and all(r[1] <= 1 + 3 * r[2] for r in rows)
    detail = ", ".join(f"{r[0]} {r[1]:.4f} (se {r[2]:.4f})" for r in rows)
    return record("C4 phi supermartingale", ok, detail, elapsed, 120)


def criterion_5():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(model=ModelConfig("dds"), alphas=[0.0, 0.5], n_paths=2000, seed=5,
                           dt=0.01, growth_horizon=100.0)
    rep = run_growth(cfg)
    ok = rep.config["G_T"] == pytest.approx(100.0)
    parts = []
    for alpha, name, mean, se, n, flagged, target in rep.rows:
        if name == "numeraire":
            ok &= abs(mean - target) <= 0.05
            parts.append(f"alpha={alpha}: {mean:.4f}")
        else:
            ok &= mean <= target + 0.05
    return record("C5 asymptotic growth", ok, ", ".join(parts), time.perf_counter() - t0, 120)


def criterion_6():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(model=ModelConfig("dds"), alpha=0.5, n_paths=800, seed=6,
                           dt=1e-4, t_max=12.0)
    rep = run_zeta_law(cfg)
    m = dict((r[0], r[1]) for r in rep.rows)
    ok = (m["oracle_sup_cdf_error"] < 0.005 and m["n_samples"] >= 5000
          and m["min_zeta"] >= m["lower_bound"] - 1e-3 and m["ks_p_value"] > 0.01)
    detail = (f"n={m['n_samples']}, oracle err {m['oracle_sup_cdf_error']:.4f}, "
              f"min {m['min_zeta']:.4f}, KS D={m['ks_statistic']:.4f} p={m['ks_p_value']:.3g}")
    return record("C6 zeta law", ok, detail, time.perf_counter() - t0, 300)


def criterion_7():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(model=ModelConfig("dds"), alphas=[0.3, 0.5, 0.7], n_paths=10_000,
                           seed=7, dt=1e-3, t_max=10.0)
    rep = run_drawdown_race(cfg)
    ok = all(mean >= a - 3 * se for a, mean, se, n, fl in rep.rows)
    detail = ", ".join(f"alpha={a}: {mean:.4f} (se {se:.4f}, flagged {fl})"
                       for a, mean, se, n, fl in rep.rows)
    return record("C7 drawdown race", ok, detail, time.perf_counter() - t0, 120)


def criterion_8():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(model=ModelConfig("dds"), alpha=0.5, level=1.0, n_paths=2000, seed=8,
                           dt=1e-3, t_max=30.0, n_list=[1, 2, 3, 4, 5, 6])
    rep = run_turnpike(cfg)
    p = [r[1] for r in rep.rows]
    ok = (all(b <= a for a, b in zip(p, p[1:])) and p[-1] < 0.05
          and all(r[5] for r in rep.rows))
    detail = "P(switch) = " + ", ".join(f"{v:.4f}" for v in p)
    return record("C8 turnpike", ok, detail, time.perf_counter() - t0, 180)


def criterion_9():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(model=ModelConfig("dds"), alpha=0.5, eps=0.02, n_paths=2000, seed=9,
                           dt=1e-3, growth_horizon=100.0)
    rep = run_oscillation(cfg)
    m = dict((r[0], r[1]) for r in rep.rows)
    ok = m["frac_min_below"] >= 0.99 and m["min_max_rel_dd"] == 1.0
    detail = f"fraction {m['frac_min_below']:.4f}, min of max {m['min_max_rel_dd']}"
    return record("C9 oscillation", ok, detail, time.perf_counter() - t0, 120)


def criterion_10(tmp):
    t0 = time.perf_counter()
    outs = []
    for threads in (1, 8):
        d = os.path.join(tmp, f"threads{threads}")
        for cmd in (["drawdown-race", "--alphas", "0.3,0.5,0.7", "--n-paths", "1000"],
                    ["turnpike", "--n-paths", "300"]):
            code = cli_main(cmd + ["--model", "dds", "--seed", "10", "--threads", str(threads),
                                   "--out", d, "--dump-samples"])
            assert code in (0, 1)
        outs.append(d)
    names = sorted(os.listdir(outs[0]))
    same = names == sorted(os.listdir(outs[1])) and all(
        filecmp.cmp(os.path.join(outs[0], f), os.path.join(outs[1], f), shallow=False)
        for f in names)
    return record("C10 thread-count determinism", same, f"{len(names)} CSV files compared",
                  time.perf_counter() - t0, None)


def test_c1_drawdown_identity():
    assert criterion_1(), RESULTS["C1 drawdown identity"][1]


def test_c2_round_trip_and_composition():
    assert criterion_2(), RESULTS["C2 round trip and composition"][1]


def test_c3_numeraire_property():
    assert criterion_3(), RESULTS["C3 numeraire property at tau_1"][1]


def test_c4_phi_supermartingale():
    assert criterion_4(), RESULTS["C4 phi supermartingale"][1]


def test_c5_asymptotic_growth():
    assert criterion_5(), RESULTS["C5 asymptotic growth"][1]


def test_c6_zeta_law():
    assert criterion_6(), RESULTS["C6 zeta law"][1]


def test_c7_drawdown_race():
    assert criterion_7(), RESULTS["C7 drawdown race"][1]


def test_c8_turnpike():
    assert criterion_8(), RESULTS["C8 turnpike"][1]


def test_c9_oscillation():
    assert criterion_9(), RESULTS["C9 oscillation"][1]


def test_c10_determinism(tmp_path):
    assert criterion_10(str(tmp_path)), RESULTS["C10 thread-count determinism"][1]


def summary_lines():
    return [f"{'PASS' if ok else 'FAIL'}  {key}: {detail}" for key, (ok, detail) in RESULTS.items()]


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                   criterion_7, criterion_8, criterion_9, lambda: criterion_10(tmp)):
            try:
                fn()
            except Exception as exc:  # report and keep going
                RESULTS[getattr(fn, "__name__", "criterion")] = (False, repr(exc))
            print(summary_lines()[-1], flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
