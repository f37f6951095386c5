"""Experiment runners shared by the CLI and the acceptance suite.

Paths are simulated in fixed-size chunks whose boundaries depend only on the
problem size, never on the thread count. Each chunk is a pure function of
``(seed, first path, size)`` and per-path results are concatenated in path
order, so every report is identical for any ``threads`` value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng
from .config import ExperimentConfig
from .horizon import (
    default_panel, growth_records, ks_test, oscillation_stats, race_outcomes,
    summarize_growth, summarize_ratio_oscillation, summarize_turnpike,
    turnpike_records, zeta_analytic_cdf, zeta_from_uniform, zeta_lower_bound,
    zeta_pareto_cdf, zeta_records, zeta_sequences,
)
from .errors import InvalidInputError
from .market import MarketModel, SimBatch, simulate_batch, wealth_paths
from .paths import INFINITY, TimeGrid, first_true
from .relative import MCEstimate, evaluate_at, phi_process, rr_values
from .transform import az_forward

CHUNK_BYTES = 96 * 2**20


@dataclass
class ExperimentReport:
    """Metrics table, named pass/fail rules and the settings that produced them."""

    name: str
    claim: str
    columns: list
    rows: list
    checks: dict
    config: dict
    samples_columns: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary_lines(self) -> list:
        lines = [f"{self.name}: {self.claim}"]
        for row in self.rows:
            lines.append("  " + ", ".join(f"{c}={_fmt(v)}" for c, v in zip(self.columns, row)))
        for k, ok in self.checks.items():
            lines.append(f"  [{'PASS' if ok else 'FAIL'}] {k}")
        return lines


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def chunk_size(model: MarketModel, grid: TimeGrid, n_paths: int) -> int:
    per_path = (grid.n_steps + 1) * 8 * (6 * model.d + 3 * model.m + 12)
    return max(1, min(n_paths, CHUNK_BYTES // per_path))


def map_paths(fn: Callable[[SimBatch], object], model: MarketModel, grid: TimeGrid,
              n_paths: int, seed: int, threads: int = 1) -> list:
    """``[fn(batch) for batch in chunks]`` in path order."""
    size = chunk_size(model, grid, n_paths)
    starts = list(range(0, n_paths, size))

    def work(start):
        return fn(simulate_batch(model, grid, min(size, n_paths - start), seed, first_path=start))

    if threads <= 1 or len(starts) == 1:
        return [work(s) for s in starts]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, starts))


def _concat(parts, axis=0):
    return np.concatenate(parts, axis=axis) if parts else np.empty(0)


# ------------------------------------------------------------ growth


def run_growth(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alphas = cfg.alphas or [cfg.get("alpha", 0.5)]
    g_target = cfg.get("growth_horizon", 100.0)
    if model.growth_rate <= 0:
        raise InvalidInputError("model has zero growth rate; log-growth ratios are undefined")
    grid = cfg.grid(0.01, g_target / model.growth_rate)
    n = cfg.get("n_paths", 2000)
    tol = cfg.get("eps", 0.05)
    panel = default_panel(model.kelly_proportions)

    def chunk(batch):
        return {a: growth_records(batch, a, panel) for a in alphas}

    parts = map_paths(chunk, model, grid, n, cfg.seed, threads)
    rows, checks = [], {}
    g_end = model.growth_rate * grid.t_max
    for a in alphas:
        rec = {k: _concat([p[a][k] for p in parts]) for k in parts[0][a]}
        res = summarize_growth(rec, a, g_end)
        rows.append([a, "numeraire", res.estimate.mean, res.estimate.se, res.estimate.n,
                     res.estimate.flagged, 1 - a])
        checks[f"alpha={a}: numeraire within {tol} of 1-alpha"] = abs(res.estimate.mean - (1 - a)) <= tol
        for name, est in res.panel.items():
            rows.append([a, name, est.mean, est.se, est.n, est.flagged, 1 - a])
            checks[f"alpha={a}: {name} at most 1-alpha+{tol}"] = est.mean <= 1 - a + tol
    return ExperimentReport(
        "growth", "constrained log-growth per unit of G tends to 1 - alpha and is not beaten",
        ["alpha", "strategy", "mean", "se", "n", "flagged", "target"], rows, checks,
        {**cfg.echo(), "G_T": g_end, "n_steps": grid.n_steps})


# ------------------------------------------------------------ zeta law


def cdf_oracle_error(alpha: float, seed: int, n: int = 200_000) -> float:
    """Sup distance between the closed-form zeta CDF and the empirical CDF of
    ``zeta(eta)`` with ``eta`` drawn uniformly."""
    z = np.sort(zeta_from_uniform(rng.uniforms(rng.seed_for_path(seed ^ 0x5EED, 0), n), alpha))
    f = zeta_analytic_cdf(z, alpha)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def run_zeta_law(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alpha = cfg.get("alpha", 0.5)
    grid = cfg.grid(1e-4, 12.0)
    n = cfg.get("n_paths", 1000)
    max_n = cfg.max_n

    def chunk(batch):
        return zeta_records(batch.numeraire.wealth, alpha, max_n, batch.path_ids)

    samples = [s for part in map_paths(chunk, model, grid, n, cfg.seed, threads) for s in part]
    samples.sort(key=lambda s: (s.path_id, s.n))
    z = np.array([s.zeta for s in samples])
    lb = zeta_lower_bound(alpha)
    oracle = cdf_oracle_error(alpha, cfg.seed)
    rows = [["n_samples", len(z)], ["oracle_sup_cdf_error", oracle],
            ["min_zeta", float(z.min()) if z.size else math.nan], ["lower_bound", lb]]
    checks = {"closed-form CDF matches the uniform-sampling oracle to 0.005": oracle < 0.005,
              "at least 5000 samples": z.size >= 5000,
              "all samples at least 1/(2-alpha) - 1e-3": bool(z.size) and float(z.min()) >= lb - 1e-3}
    if z.size >= 20:
        ks = ks_test(z, lambda x: zeta_analytic_cdf(x, alpha))
        ks_p = ks_test(z, lambda x: zeta_pareto_cdf(x, alpha))
        rows += [["ks_statistic", ks.statistic], ["ks_p_value", ks.p_value],
                 ["pareto_ks_statistic", ks_p.statistic], ["pareto_ks_p_value", ks_p.p_value]]
        checks["KS against the closed-form law, p > 0.01"] = ks.p_value > 0.01
    else:
        checks["KS against the closed-form law, p > 0.01"] = False
    seqs = zeta_sequences(samples)
    ro = summarize_ratio_oscillation(seqs, alpha, [1])
    rows += [["lag1_autocorr_log_zeta", ro.lag1_autocorr], ["n_pairs", ro.n_pairs]]
    return ExperimentReport(
        "zeta-law", "finite-horizon to asymptotic wealth ratio at cycle ends follows the stated law",
        ["metric", "value"], rows, checks, {**cfg.echo(), "n_steps": grid.n_steps},
        ["path_id", "n", "zeta"], [[s.path_id, s.n, s.zeta] for s in samples])


# ------------------------------------------------------------ oscillation


def run_oscillation(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alpha = cfg.get("alpha", 0.5)
    eps = cfg.get("eps", 0.02)
    g_target = cfg.get("growth_horizon", 100.0)
    grid = cfg.grid(1e-3, g_target / model.growth_rate)
    n = cfg.get("n_paths", 2000)

    def chunk(batch):
        ax = az_forward(batch.numeraire.wealth, alpha)
        return [(int(pid), oscillation_stats(row, alpha, eps)) for pid, row in zip(batch.path_ids, ax)]

    stats = [s for part in map_paths(chunk, model, grid, n, cfg.seed, threads) for s in part]
    mins = np.array([s.min_rel_dd for _, s in stats])
    maxs = np.array([s.max_rel_dd for _, s in stats])
    frac = float(np.mean(mins <= alpha + eps))
    rows = [["n_paths", len(stats)], ["frac_min_below", frac], ["mean_min_rel_dd", float(mins.mean())],
            ["max_min_rel_dd", float(mins.max())], ["min_max_rel_dd", float(maxs.min())],
            ["mean_crossings_below", float(np.mean([s.crossings_below for _, s in stats]))]]
    checks = {f"at least 99% of paths reach alpha+{eps}": frac >= 0.99,
              "max relative drawdown is 1 on every path": bool(np.all(maxs == 1.0))}
    return ExperimentReport(
        "oscillation", "relative drawdown of the constrained numeraire oscillates between alpha and 1",
        ["metric", "value"], rows, checks, {**cfg.echo(), "n_steps": grid.n_steps},
        ["path_id", "min_rel_dd", "max_rel_dd", "crossings_below", "crossings_above"],
        [[pid, s.min_rel_dd, s.max_rel_dd, s.crossings_below, s.crossings_above] for pid, s in stats])


# ------------------------------------------------------------ race


def run_drawdown_race(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alphas = cfg.alphas or [cfg.get("alpha", 0.5)]
    grid = cfg.grid(1e-3, 10.0)
    n = cfg.get("n_paths", 10_000)

    def chunk(batch):
        w = batch.numeraire.wealth
        return np.stack([race_outcomes(w, a) for a in alphas], axis=1)

    out = _concat(map_paths(chunk, model, grid, n, cfg.seed, threads))
    rows, checks = [], {}
    for j, a in enumerate(alphas):
        est = MCEstimate.from_samples(out[:, j])
        rows.append([a, est.mean, est.se, est.n, est.flagged])
        checks[f"alpha={a}: win frequency at least alpha - 3 se"] = est.at_least(a)
    return ExperimentReport(
        "drawdown-race", "drawdown to alpha comes before an e-fold of the maximum with probability at least alpha",
        ["alpha", "mean", "se", "n", "flagged"], rows, checks, {**cfg.echo(), "n_steps": grid.n_steps},
        ["path_id"] + [f"win_{a}" for a in alphas],
        [[i] + list(r) for i, r in enumerate(out.tolist())])


# ------------------------------------------------------------ turnpike


def run_turnpike(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alpha = cfg.get("alpha", 0.5)
    level = cfg.get("level", 1.0)
    n_list = cfg.get("n_list", [1, 2, 3, 4, 5, 6])
    eps = cfg.get("eps", 1e-3)
    grid = cfg.grid(1e-3, 30.0)
    n = cfg.get("n_paths", 2000)

    def chunk(batch):
        w = batch.numeraire.wealth
        s, d = turnpike_records(w, alpha, level, n_list)
        missed = first_true(w >= math.exp(level)) == INFINITY
        return s, d, missed

    parts = map_paths(chunk, model, grid, n, cfg.seed, threads)
    sw = _concat([p[0] for p in parts])
    dev = _concat([p[1] for p in parts])
    missed = int(np.sum(_concat([p[2] for p in parts])))
    table = summarize_turnpike(sw, dev, n_list, eps)
    rows = [[r.n, r.p_switch_before, r.mean_sup_dev, r.q95_sup_dev, r.p_dev_above_eps,
             r.zero_when_not_switched] for r in table]
    p = [r.p_switch_before for r in table]
    checks = {
        "P(switch before level) nonincreasing in n": all(b <= a for a, b in zip(p, p[1:])),
        "P(switch before level) below 0.05 at the last n": p[-1] < 0.05,
        "deviation exactly 0 on paths that have not switched": all(r.zero_when_not_switched for r in table),
        "P(deviation > eps) at most P(switch)": all(r.p_dev_above_eps <= r.p_switch_before for r in table),
    }
    return ExperimentReport(
        "turnpike", "finite-horizon optimal portfolios agree with the constrained numeraire on initial intervals",
        ["n", "p_switch_before", "mean_sup_dev", "q95_sup_dev", "p_dev_above_eps", "zero_when_not_switched"],
        rows, checks, {**cfg.echo(), "n_steps": grid.n_steps, "level_not_reached": missed})


# ------------------------------------------------------------ numeraire test


STRATEGIES = ("baseline", "buyhold", "halfkelly")


def strategy_wealth(name: str, batch: SimBatch) -> np.ndarray:
    """Unconstrained wealth rows of a named test strategy or a proportions CSV.

    ``buyhold`` splits the initial wealth equally across assets and never trades.
    """
    model = batch.model
    if name == "baseline":
        return np.ones((batch.n_paths, batch.grid.n_steps + 1))
    if name == "buyhold":
        return np.mean(batch.prices / batch.prices[:, :1], axis=-1)
    if name == "halfkelly":
        return wealth_paths(batch, 0.5 * model.kelly_proportions)
    return wealth_paths(batch, load_proportions(name, model.d))


def load_proportions(path: str, d: int) -> np.ndarray:
    """A CSV of constant proportions: one row of ``d`` numbers (header optional)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InvalidInputError(f"cannot read strategy file {path}: {exc}") from None
    for ln in lines:
        try:
            vals = [float(v) for v in ln.split(",")]
        except ValueError:
            continue
        if len(vals) != d or not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"strategy row needs {d} finite proportions, got {ln!r}")
        return np.array(vals)
    raise InvalidInputError(f"no numeric row in strategy file {path}")


def run_numeraire_test(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    model = cfg.model.build()
    alpha = cfg.get("alpha", 0.5)
    level = cfg.get("level", 1.0)
    grid = cfg.grid(0.01, 60.0)
    n = cfg.get("n_paths", 5000)
    names = list(STRATEGIES) if cfg.strategy in (None, "all") else [cfg.strategy]
    for s in names:
        if s not in STRATEGIES:
            load_proportions(s, model.d)

    def chunk(batch):
        xhat = batch.numeraire.wealth
        axhat = az_forward(xhat, alpha)
        tau = first_true(xhat >= math.exp(level))
        tau_half = first_true(xhat >= math.exp(level / 2))
        res = {}
        for s in names:
            z = strategy_wealth(s, batch)
            az = az_forward(z, alpha)
            phi = phi_process(z, xhat, alpha)
            r_tau = rr_values(az, axhat, tau)
            res[s] = (r_tau, evaluate_at(phi, tau), r_tau - rr_values(az, axhat, tau_half))
        return res

    parts = map_paths(chunk, model, grid, n, cfg.seed, threads)
    rows, checks = [], {}
    for s in names:
        err = MCEstimate.from_samples(_concat([p[s][0] for p in parts]))
        phi = MCEstimate.from_samples(_concat([p[s][1] for p in parts]))
        inc = MCEstimate.from_samples(_concat([p[s][2] for p in parts]))
        for test, est, bound in ((f"err_{s}", err, 0.0), (f"phi_{s}", phi, 1.0),
                                 (f"maxima_{s}", inc, 0.0)):
            ok = est.at_most(bound)
            rows.append([test, est.mean, est.se, est.n, est.flagged, ok])
            checks[f"{test} at most {bound} + 3 se"] = ok
    return ExperimentReport(
        "numeraire-test", "no constrained strategy has positive expected return relative to the constrained numeraire at times of maximum",
        ["test", "mean", "se", "n", "flagged", "pass"], rows, checks,
        {**cfg.echo(), "n_steps": grid.n_steps})


RUNNERS = {
    "growth": run_growth,
    "zeta-law": run_zeta_law,
    "oscillation": run_oscillation,
    "drawdown-race": run_drawdown_race,
    "turnpike": run_turnpike,
    "numeraire-test": run_numeraire_test,
}
