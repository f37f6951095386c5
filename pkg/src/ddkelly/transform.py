"""The Azema-Yor map between unconstrained and drawdown-constrained wealth.

For a wealth path ``X`` with running maximum ``M`` and a floor fraction
``alpha`` in [0, 1)::

    aX = alpha * M**(1 - alpha) + (1 - alpha) * X * M**(-alpha)

satisfies ``aX >= alpha * max(aX)`` exactly, and every constrained wealth
path arises this way from exactly one unconstrained one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolationError, InvalidInputError
from .market import SimBatch, proportion_array, wealth_paths
from .paths import SampledPath, _unwrap, _wrap


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha


def _check_starts_at_one(x: np.ndarray, what: str):
    if not np.allclose(x[..., 0], 1.0, rtol=0, atol=1e-12):
        raise InvalidInputError(f"{what} must start at 1")


def az_forward(x, alpha: float):
    """Constrained wealth generated by ``x``; identity at ``alpha = 0``."""
    alpha = _check_alpha(alpha)
    v, grid = _unwrap(x)
    _check_starts_at_one(v, "wealth path")
    m = np.maximum.accumulate(v, axis=-1)
    return _wrap(alpha * m ** (1.0 - alpha) + (1.0 - alpha) * v * m ** (-alpha), grid)


def az_inverse(chi, alpha: float, tol: float = 1e-9):
    """Unconstrained wealth whose forward transform is ``chi``.

    ``chi`` must satisfy ``chi >= alpha * max(chi)`` up to the relative
    tolerance ``tol``; small roundoff undershoots are clamped to the floor,
    which maps to zero wealth.
    """
    alpha = _check_alpha(alpha)
    v, grid = _unwrap(chi)
    _check_starts_at_one(v, "constrained path")
    n = np.maximum.accumulate(v, axis=-1)
    floor = alpha * n
    bad = v < floor * (1.0 - tol)
    if bad.any():
        first = int(np.argmax(bad.reshape(-1, bad.shape[-1]).any(axis=0)))
        raise ConstraintViolationError(
            f"path falls below {alpha} x running maximum at index {first}", first)
    excess = np.maximum(v - floor, 0.0)
    return _wrap(n ** (alpha / (1.0 - alpha)) * excess / (1.0 - alpha), grid)


def kelly_fraction(rel_dd, alpha: float):
    """Share of constrained wealth held in the generating fund.

    ``(1-a) r / (a + (1-a) r)`` for relative drawdown ``r`` of the generating
    wealth; increasing in ``r`` and bounded by ``1 - alpha``.
    """
    alpha = _check_alpha(alpha)
    r = np.asarray(rel_dd, dtype=float)
    if np.any(~((r >= 0) & (r <= 1))):
        raise InvalidInputError("relative drawdown must lie in [0, 1]")
    num = (1.0 - alpha) * r
    out = np.divide(num, alpha + num, out=np.zeros_like(num), where=(alpha + num) > 0)
    return float(out) if out.ndim == 0 else out


def constrained_wealth_paths(batch: SimBatch, base_proportions, alpha: float) -> np.ndarray:
    """Constrained wealth built by trading, one row per path.

    At each step the constrained account holds ``kelly_fraction`` of its
    value in the generating portfolio (split across assets like
    ``base_proportions``) and the rest in the baseline asset. This is the
    first-order discretisation of ``d(aX) = (1 - alpha) M**(-alpha) dX``.
    """
    alpha = _check_alpha(alpha)
    pi = proportion_array(batch, base_proportions)
    base = wealth_paths(batch, pi)
    if alpha == 0.0:
        return base
    base_ret = np.sum(pi * batch.returns, axis=-1)
    rel = base[:, :-1] / np.maximum.accumulate(base, axis=1)[:, :-1]
    frac = kelly_fraction(np.nan_to_num(rel, nan=0.0), alpha)
    factor = np.maximum(1.0 + frac * base_ret, 0.0)
    out = np.empty_like(base)
    out[:, 0] = 1.0
    np.cumprod(factor, axis=1, out=out[:, 1:])
    return out


def constrained_wealth_direct(batch: SimBatch, path_index: int, base_proportions,
                              alpha: float) -> SampledPath:
    return SampledPath(batch.grid, constrained_wealth_paths(batch, base_proportions, alpha)[path_index])


@dataclass
class DrawdownReport:
    alpha: float
    tol: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_drawdown(path, alpha: float, tol: float = 0.0) -> DrawdownReport:
    """List every index where ``path < alpha * running_max - tol``."""
    v, _ = _unwrap(path)
    if v.ndim != 1:
        raise InvalidInputError("verify_drawdown expects a single path")
    m = np.maximum.accumulate(v)
    idx = np.flatnonzero(v < alpha * m - tol)
    return DrawdownReport(alpha=float(alpha), tol=float(tol), violations=[int(i) for i in idx])
