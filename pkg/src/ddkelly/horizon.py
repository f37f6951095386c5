"""Drawdown cycles, finite-horizon optimal portfolios and long-run experiments.

Cycle times of a numeraire path ``X`` for a floor ``alpha``::

    T_{1/2} = 0
    T_n       = first index after T_{n-1/2} with X / X* <= alpha
    T_{n+1/2} = first index after T_n with X >= X*_{T_n}

The portfolio that is optimal up to ``T_n`` follows the constrained
numeraire until ``T_{n-1/2}``, then holds the unconstrained numeraire, and
sits in the baseline asset from ``T_n`` on. Its ratio to the constrained
numeraire at ``T_n`` is ``zeta_n = (X*_{T_n} / X_{T_{n-1/2}})**alpha / (2 - alpha)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .market import SimBatch, wealth_paths
from .paths import INFINITY, SampledPath, _unwrap, _wrap, first_true, is_finite_index
from .relative import MCEstimate, evaluate_at
from .transform import az_forward

log = logging.getLogger(__name__)


def _check_open_alpha(alpha):
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")


# ---------------------------------------------------------------- cycles


@dataclass(frozen=True)
class CycleTimes:
    """``halves[n-1] = T_{n-1/2}`` and ``hits[n-1] = T_n`` for ``n = 1, 2, ...``.

    Both lists stop at their first INFINITY entry; later entries are
    INFINITY as well.
    """

    halves: tuple
    hits: tuple

    def half(self, n: int) -> int:
        """``T_{n-1/2}``."""
        return self.halves[n - 1] if n <= len(self.halves) else INFINITY

    def hit(self, n: int) -> int:
        """``T_n``."""
        return self.hits[n - 1] if n <= len(self.hits) else INFINITY

    @property
    def n_complete(self) -> int:
        return sum(1 for t in self.hits if is_finite_index(t))


def cycle_times(xhat, alpha: float, max_cycles: Optional[int] = None) -> CycleTimes:
    _check_open_alpha(alpha)
    x, _ = _unwrap(xhat)
    if x.ndim != 1:
        raise InvalidInputError("cycle_times expects a single path")
    m = np.maximum.accumulate(x)
    below = x <= alpha * m
    halves, hits = [0], []
    while True:
        start = halves[-1] + 1
        j = int(np.argmax(below[start:])) if start < x.size else 0
        if start >= x.size or not below[start + j]:
            hits.append(INFINITY)
            break
        t_n = start + j
        hits.append(t_n)
        if max_cycles is not None and len(hits) >= max_cycles:
            break
        after = t_n + 1
        rec = x[after:] >= m[t_n]
        if not rec.any():
            halves.append(INFINITY)
            hits.append(INFINITY)
            break
        halves.append(after + int(np.argmax(rec)))
    return CycleTimes(tuple(halves), tuple(hits))


# ------------------------------------------------------ finite horizon


@dataclass(frozen=True)
class HorizonPortfolio:
    """The ``n``-th finite-horizon portfolio; ``complete`` iff ``T_n`` is on the grid."""

    wealth: object
    n: int
    switch_index: int
    stop_index: int

    @property
    def complete(self) -> bool:
        return is_finite_index(self.stop_index)


def finite_horizon_numeraire(xhat, alpha: float, n: int,
                             cycles: Optional[CycleTimes] = None) -> HorizonPortfolio:
    """Constrained wealth with the numeraire property over ``[0, T_n]``.

    Identical (bit for bit) to the constrained numeraire up to and including
    ``T_{n-1/2}``. When the cycle is not finished on the grid the result is
    the constrained numeraire, switched if ``T_{n-1/2}`` was reached, and
    ``complete`` is False.
    """
    if n < 1:
        raise InvalidInputError(f"cycle index must be >= 1, got {n}")
    _check_open_alpha(alpha)
    x, grid = _unwrap(xhat)
    if cycles is None:
        cycles = cycle_times(x, alpha, max_cycles=n)
    ax = az_forward(x, alpha)
    h, t_n = cycles.half(n), cycles.hit(n)
    out = ax.copy()
    if is_finite_index(h):
        scale = ax[h] / x[h]
        end = t_n if is_finite_index(t_n) else x.size
        out[h + 1:end] = scale * x[h + 1:end]
        if is_finite_index(t_n):
            # alpha * scale * X*_{T_n}, read off the realised maximum so the
            # floor holds to the last bit
            out[t_n:] = alpha * np.max(out[:t_n])
    return HorizonPortfolio(_wrap(out, grid), n, h, t_n)


# ----------------------------------------------------------- zeta law


@dataclass(frozen=True)
class ZetaSample:
    path_id: int
    n: int
    zeta: float


def zeta_values(xhat, alpha: float, max_n: Optional[int] = None) -> list:
    """``[(n, zeta_n)]`` for every finished cycle ``n <= max_n`` on one path."""
    x, _ = _unwrap(xhat)
    cyc = cycle_times(x, alpha, max_cycles=max_n)
    m = np.maximum.accumulate(x)
    out = []
    for n, (h, t) in enumerate(zip(cyc.halves, cyc.hits), start=1):
        if not (is_finite_index(h) and is_finite_index(t)):
            break
        out.append((n, (m[t] / x[h]) ** alpha / (2.0 - alpha)))
    return out


def zeta_records(xhat_rows: np.ndarray, alpha: float, max_n: Optional[int],
                 path_ids: Sequence[int]) -> list:
    _check_open_alpha(alpha)
    samples = []
    for pid, row in zip(path_ids, xhat_rows):
        samples.extend(ZetaSample(int(pid), n, float(z)) for n, z in zeta_values(row, alpha, max_n))
    return samples


def zeta_samples(batch: SimBatch, alpha: float, max_n: Optional[int] = None) -> list:
    """Pooled zeta samples over paths and cycles, sorted by ``(path_id, n)``."""
    samples = zeta_records(batch.numeraire.wealth, alpha, max_n, batch.path_ids)
    if not samples:
        log.warning("no finished drawdown cycle on any path")
    return samples


def zeta_lower_bound(alpha: float) -> float:
    return 1.0 / (2.0 - alpha)


def zeta_analytic_cdf(z, alpha: float):
    """CDF of ``(alpha + (1 - alpha)/eta)**alpha / (2 - alpha)``, ``eta ~ U(0, 1)``."""
    _check_open_alpha(alpha)
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        y = ((2.0 - alpha) * z) ** (1.0 / alpha)
        tail = np.minimum(1.0, (1.0 - alpha) / (y - alpha))
        f = np.where(z > zeta_lower_bound(alpha), 1.0 - tail, 0.0)
    return float(f) if f.ndim == 0 else f


def zeta_from_uniform(eta, alpha: float):
    """Inverse-CDF map for :func:`zeta_analytic_cdf`."""
    eta = np.asarray(eta, dtype=float)
    return (alpha + (1.0 - alpha) / eta) ** alpha / (2.0 - alpha)


def zeta_pareto_cdf(z, alpha: float):
    """CDF of zeta when the cycle's maximum ratio is Pareto(alpha / (1 - alpha)).

    In the time-changed picture ``log X`` is a Brownian motion with drift
    1/2; the log-maximum it gains before a drawdown of depth ``log(1/alpha)``
    is exponential with mean ``(1 - alpha)/alpha``. Hence
    ``P(zeta > z) = ((2 - alpha) z)**(-1/(1 - alpha))``.
    """
    _check_open_alpha(alpha)
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        tail = ((2.0 - alpha) * z) ** (-1.0 / (1.0 - alpha))
        f = np.where(z > zeta_lower_bound(alpha), 1.0 - tail, 0.0)
    return float(f) if f.ndim == 0 else f


def zeta_pareto_from_uniform(eta, alpha: float):
    eta = np.asarray(eta, dtype=float)
    return eta ** (-(1.0 - alpha)) / (2.0 - alpha)


# ------------------------------------------------------------------ KS


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution, truncated series."""
    if lam <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    if lam < 1.0:
        # Jacobi-transformed series; converges fast for small lam
        cdf = math.sqrt(2 * math.pi) / lam * math.fsum(
            np.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam)))
        return min(1.0, max(0.0, 1.0 - cdf))
    sf = 2.0 * math.fsum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam))
    return min(1.0, max(0.0, sf))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int


def ks_test(samples, cdf: Callable) -> KSResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 20:
        raise InvalidInputError(f"KS test needs at least 20 samples, got {n}")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KSResult(d, kolmogorov_sf(math.sqrt(n) * d), n)


# --------------------------------------------------------------- growth


@dataclass(frozen=True)
class GrowthResult:
    alpha: float
    horizon_growth: float
    estimate: MCEstimate
    panel: dict

    @property
    def best_panel_mean(self) -> float:
        return max((e.mean for e in self.panel.values()), default=-math.inf)


def default_panel(kelly: np.ndarray) -> dict:
    """Test strategies as constant asset proportions."""
    d = kelly.size
    return {
        "baseline": np.zeros(d),
        "buy_and_hold": np.eye(d)[0],
        "half_kelly": 0.5 * kelly,
        "double_kelly": 2.0 * kelly,
    }


def log_growth_ratios(wealth_rows: np.ndarray, growth_at_end: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(wealth_rows[:, -1]) / growth_at_end


def growth_records(batch: SimBatch, alpha: float, panel: Mapping[str, object]) -> dict:
    nb = batch.numeraire
    g_end = nb.growth[:, -1]
    if np.any(g_end <= 0):
        raise InvalidInputError("growth process is zero at the horizon: degenerate model")
    if np.min(g_end) < 50:
        log.warning("horizon growth %.3g is below 50; ratios are far from their limit",
                    float(np.min(g_end)))
    out = {"__numeraire__": log_growth_ratios(az_forward(nb.wealth, alpha), g_end)}
    for name, props in panel.items():
        out[name] = log_growth_ratios(az_forward(wealth_paths(batch, props), alpha), g_end)
    return out


def growth_rate_experiment(batch: SimBatch, alpha: float,
                           panel: Optional[Mapping[str, object]] = None) -> GrowthResult:
    """``log(aX_T) / G_T`` for the constrained numeraire and a panel of rivals."""
    if panel is None:
        panel = default_panel(batch.numeraire.rho[0, 0])
    rec = growth_records(batch, alpha, panel)
    return summarize_growth(rec, alpha, float(np.mean(batch.numeraire.growth[:, -1])))


def summarize_growth(records: Mapping[str, np.ndarray], alpha: float, g_end: float) -> GrowthResult:
    est = MCEstimate.from_samples(records["__numeraire__"])
    panel = {k: MCEstimate.from_samples(v) for k, v in records.items() if k != "__numeraire__"}
    return GrowthResult(alpha, g_end, est, panel)


# ---------------------------------------------------------- oscillation


@dataclass(frozen=True)
class OscillationStats:
    min_rel_dd: float
    max_rel_dd: float
    crossings_below: int
    crossings_above: int


def oscillation_stats(constrained, alpha: float, eps: float = 0.02) -> OscillationStats:
    """Range of the relative drawdown and entries into its two extreme bands.

    A crossing is counted at index ``k >= 1`` when the relative drawdown
    enters ``[0, alpha + eps]`` (resp. ``[1 - eps, 1]``) from outside.
    """
    x, _ = _unwrap(constrained)
    rd = x / np.maximum.accumulate(x)
    low = rd <= alpha + eps
    high = rd >= 1.0 - eps
    return OscillationStats(
        min_rel_dd=float(rd.min()),
        max_rel_dd=float(rd.max()),
        crossings_below=int(np.count_nonzero(low[1:] & ~low[:-1])),
        crossings_above=int(np.count_nonzero(high[1:] & ~high[:-1])),
    )


# ------------------------------------------------------------ race


def race_outcomes(xhat_rows: np.ndarray, alpha: float) -> np.ndarray:
    """1.0 if the drawdown reaches ``alpha`` before ``X`` reaches ``e X_0``, else 0.0.

    NaN where neither event happens on the grid.
    """
    _check_open_alpha(alpha)
    x = np.atleast_2d(xhat_rows)
    rd = x / np.maximum.accumulate(x, axis=1)
    t_dd = first_true(rd <= alpha)
    t_up = first_true(x >= math.e * x[:, :1])
    out = (t_dd < t_up).astype(float)
    out[(t_dd == INFINITY) & (t_up == INFINITY)] = np.nan
    return out


def drawdown_race(batch: SimBatch, alpha: float) -> MCEstimate:
    """Win frequency of the drawdown; excluded paths are counted in ``flagged``."""
    return MCEstimate.from_samples(race_outcomes(batch.numeraire.wealth, alpha))


# -------------------------------------------------------------- turnpike


@dataclass(frozen=True)
class TurnpikeRow:
    n: int
    p_switch_before: float
    mean_sup_dev: float
    q95_sup_dev: float
    p_dev_above_eps: float
    zero_when_not_switched: bool


def turnpike_records(xhat_rows: np.ndarray, alpha: float, level: float,
                     n_list: Sequence[int]) -> tuple:
    """Per path and ``n``: whether ``T_{n-1/2} <= tau_level`` and the sup
    deviation of the ``n``-th finite-horizon portfolio from the constrained
    numeraire over ``[0, tau_level]``.

    Paths that never reach the level use the whole grid.
    """
    _check_open_alpha(alpha)
    rows = np.atleast_2d(xhat_rows)
    switched = np.zeros((rows.shape[0], len(n_list)), dtype=bool)
    dev = np.zeros((rows.shape[0], len(n_list)))
    top = max(n_list)
    for i, x in enumerate(rows):
        tau = first_true(x >= math.exp(level))
        end = min(int(tau), x.size - 1)
        cyc = cycle_times(x, alpha, max_cycles=top)
        ax = az_forward(x, alpha)
        for j, n in enumerate(n_list):
            switched[i, j] = cyc.half(n) <= end
            hp = finite_horizon_numeraire(x, alpha, n, cycles=cyc)
            dev[i, j] = float(np.max(np.abs(hp.wealth[: end + 1] - ax[: end + 1])))
    return switched, dev


def summarize_turnpike(switched: np.ndarray, dev: np.ndarray, n_list: Sequence[int],
                       eps: float = 1e-3) -> list:
    out = []
    for j, n in enumerate(n_list):
        d = dev[:, j]
        out.append(TurnpikeRow(
            n=int(n),
            p_switch_before=float(np.mean(switched[:, j])),
            mean_sup_dev=math.fsum(d) / d.size,
            q95_sup_dev=float(np.quantile(d, 0.95)),
            p_dev_above_eps=float(np.mean(d > eps)),
            zero_when_not_switched=bool(np.all(d[~switched[:, j]] == 0.0)),
        ))
    return out


def turnpike_experiment(batch: SimBatch, alpha: float, level: float,
                        n_list: Sequence[int], eps: float = 1e-3) -> list:
    s, d = turnpike_records(batch.numeraire.wealth, alpha, level, n_list)
    return summarize_turnpike(s, d, n_list, eps)


# ------------------------------------------------ ratio oscillation


@dataclass(frozen=True)
class RatioRow:
    n: int
    n_paths: int
    mean_running_min: float
    min_running_min: float
    median_running_max: float
    frac_max_above: float


@dataclass(frozen=True)
class RatioOscillation:
    rows: list
    lag1_autocorr: float
    n_pairs: int
    max_multiple: float

    @property
    def autocorr_ok(self) -> bool:
        return self.n_pairs > 0 and abs(self.lag1_autocorr) <= 3.0 / math.sqrt(self.n_pairs)


def lag1_autocorr(sequences: Iterable[Sequence[float]]) -> tuple:
    """Pooled lag-1 correlation of ``log zeta`` over consecutive cycles.

    The log tames the heavy upper tail (the second moment of zeta is
    infinite at ``alpha = 1/2``).
    """
    a, b = [], []
    for seq in sequences:
        v = np.log(np.asarray(seq, dtype=float))
        a.extend(v[:-1])
        b.extend(v[1:])
    if len(a) < 3:
        return math.nan, len(a)
    return float(np.corrcoef(a, b)[0, 1]), len(a)


def summarize_ratio_oscillation(sequences: Sequence[Sequence[float]], alpha: float,
                                n_list: Sequence[int], max_multiple: float = 10.0) -> RatioOscillation:
    lb = zeta_lower_bound(alpha)
    rows = []
    for n in n_list:
        runs = [np.asarray(s[:n]) for s in sequences if len(s) >= n]
        if not runs:
            rows.append(RatioRow(int(n), 0, math.nan, math.nan, math.nan, math.nan))
            continue
        mins = np.array([r.min() for r in runs])
        maxs = np.array([r.max() for r in runs])
        rows.append(RatioRow(int(n), len(runs), float(mins.mean()), float(mins.min()),
                             float(np.median(maxs)), float(np.mean(maxs > max_multiple * lb))))
    rho, npairs = lag1_autocorr(sequences)
    return RatioOscillation(rows, rho, npairs, max_multiple)


def zeta_sequences(samples: Sequence[ZetaSample]) -> list:
    seqs: dict = {}
    for s in sorted(samples, key=lambda s: (s.path_id, s.n)):
        seqs.setdefault(s.path_id, []).append(s.zeta)
    return list(seqs.values())


def horizon_ratio_oscillation(batch: SimBatch, alpha: float, n_list: Sequence[int],
                              max_multiple: float = 10.0) -> RatioOscillation:
    """Running min and max of ``zeta_1..zeta_n`` per path, plus independence."""
    samples = zeta_samples(batch, alpha, max(n_list))
    return summarize_ratio_oscillation(zeta_sequences(samples), alpha, n_list, max_multiple)
