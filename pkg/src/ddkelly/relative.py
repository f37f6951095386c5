"""Relative returns, their Monte Carlo expectations and the numeraire tests.

``rr_T(X | X') = X_T / X'_T - 1`` with the convention ``0/0 = 1``. On a
finite grid a stopping time that never fires is evaluated at the last grid
point, a proxy for the limit superior over an infinite horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import InvalidInputError
from .paths import SampledPath, _unwrap
from .transform import az_forward

Z_95 = 1.959963984540054


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error over the finite samples.

    ``flagged`` counts samples that were non-finite and left out.
    """

    mean: float
    se: float
    n: int
    flagged: int = 0

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - Z_95 * self.se, self.mean + Z_95 * self.se)

    def at_most(self, bound: float, n_se: float = 3.0) -> bool:
        """One-sided check ``mean <= bound + n_se * se``."""
        return self.mean <= bound + n_se * self.se

    def at_least(self, bound: float, n_se: float = 3.0) -> bool:
        return self.mean >= bound - n_se * self.se

    @classmethod
    def from_samples(cls, samples: Iterable[float]) -> "MCEstimate":
        """Order-independent estimate: sums are exactly rounded (``math.fsum``)."""
        x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                       dtype=float).ravel()
        finite = x[np.isfinite(x)]
        flagged = int(x.size - finite.size)
        n = int(finite.size)
        if n == 0:
            return cls(math.nan, math.nan, 0, flagged)
        mean = math.fsum(finite) / n
        if n < 2:
            return cls(mean, math.nan, n, flagged)
        var = math.fsum((finite - mean) ** 2) / (n - 1)
        return cls(mean, math.sqrt(var / n), n, flagged)


def _ratio(x, y):
    """``x / y`` with ``0/0 = 1`` and ``x/0 = inf`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    both_zero = (x == 0) & (y == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(both_zero, 1.0, x / np.where(both_zero, 1.0, y))
    return r


def evaluate_at(values: np.ndarray, t) -> np.ndarray:
    """Values at grid index ``min(t, n_steps)``, per row when ``t`` is an array."""
    last = values.shape[-1] - 1
    t = np.minimum(np.asarray(t, dtype=np.int64), last)
    if values.ndim == 1:
        return values[t]
    return np.take_along_axis(values, t.reshape(-1, 1), axis=-1)[:, 0]


def rr_values(x: np.ndarray, x_ref: np.ndarray, t) -> np.ndarray:
    """Vectorised :func:`rr_at` over rows of ``x`` and ``x_ref``."""
    return _ratio(evaluate_at(x, t), evaluate_at(x_ref, t)) - 1.0


def rr_at(x, x_ref, t: int) -> float:
    """Return of ``x`` relative to ``x_ref`` over ``[0, t]``."""
    a, ga = _unwrap(x)
    b, gb = _unwrap(x_ref)
    if a.shape != b.shape or (ga is not None and gb is not None and ga != gb):
        raise InvalidInputError("paths must share the same grid")
    return float(rr_values(a, b, t))


@dataclass(frozen=True)
class RRCheck:
    rr: float
    rr_reverse: float
    expected_reverse: float
    ok: bool

    @property
    def rr_sum(self) -> float:
        return self.rr + self.rr_reverse


def rr_inequality_check(x, x_ref, t: int, tol: float = 1e-12) -> RRCheck:
    """Check ``rr(x_ref|x) = -r/(1+r)`` and ``rr(x|x_ref) + rr(x_ref|x) >= 0``.

    ``tol`` is relative and widened by ``1/(1+r)``, the conditioning of the
    identity when ``x`` is far below ``x_ref``.
    """
    r = rr_at(x, x_ref, t)
    rev = rr_at(x_ref, x, t)
    expected = -r / (1.0 + r) if r != -1.0 else math.inf
    if math.isinf(expected) or math.isinf(rev):
        equal = expected == rev
    else:
        cond = max(1.0, 1.0 / abs(1.0 + r))
        equal = abs(rev - expected) <= tol * max(1.0, abs(expected)) * cond
    total = r + rev
    ok = equal and (math.isnan(total) is False) and total >= -tol * max(1.0, abs(r))
    return RRCheck(rr=r, rr_reverse=rev, expected_reverse=expected, ok=bool(ok))


def err_mc(evaluator: Callable[[int], float], n_paths: int) -> MCEstimate:
    """Monte Carlo expected relative return.

    ``evaluator(i)`` returns the relative return on path ``i``; it is called
    once per index in index order. Non-finite values (a bankrupt reference
    gives ``+inf``) are counted in ``flagged`` rather than averaged.
    """
    if n_paths < 2:
        raise InvalidInputError("err_mc needs at least two paths")
    return MCEstimate.from_samples([evaluator(i) for i in range(n_paths)])


def phi_process(x, xhat, alpha: float):
    """Azema-Yor transform of the ratio ``x / xhat``; a nonnegative local martingale."""
    a, grid = _unwrap(x)
    b, _ = _unwrap(xhat)
    if np.any(b <= 0):
        raise InvalidInputError("reference wealth must stay positive")
    chi = a / b
    out = az_forward(chi, alpha)
    return SampledPath(grid, out) if grid is not None else out


@dataclass(frozen=True)
class MaximaCheck:
    """``rr`` at the earlier time and the increment ``rr_tau - rr_sigma``."""

    at_sigma: MCEstimate
    increment: MCEstimate

    @property
    def ok(self) -> bool:
        return self.increment.at_most(0.0)


def maxima_supermartingale_check(x_alpha: np.ndarray, xhat_alpha: np.ndarray,
                                 sigma, tau) -> MaximaCheck:
    """Unconditional form of the supermartingale property along times of maximum.

    Rows of ``x_alpha`` and ``xhat_alpha`` are constrained wealth paths;
    ``sigma`` and ``tau`` hold one grid time of maximum of the numeraire per
    row with ``sigma <= tau``.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    tau = np.asarray(tau, dtype=np.int64)
    if np.any(sigma > tau):
        raise InvalidInputError("sigma must not exceed tau on any path")
    r_sigma = rr_values(x_alpha, xhat_alpha, sigma)
    r_tau = rr_values(x_alpha, xhat_alpha, tau)
    with np.errstate(invalid="ignore"):
        inc = np.where(sigma == tau, 0.0, r_tau - r_sigma)
    return MaximaCheck(MCEstimate.from_samples(r_sigma), MCEstimate.from_samples(inc))
