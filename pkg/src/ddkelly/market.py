"""Ito-diffusion markets, the numeraire (Kelly) portfolio and proportional wealth.

Prices are discounted by the baseline asset. A model supplies the excess
rate vector ``b`` and the volatility matrix ``sigma`` as functions of time and
price, or as constants. Wealth processes are parametrised by the fraction of
wealth held in each asset; the remainder sits in the baseline asset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import rng
from .errors import InvalidInputError, NoNumeraireError, SimulationError
from .paths import SampledPath, TimeGrid

DriftFn = Callable[[float, np.ndarray], np.ndarray]
VolFn = Callable[[float, np.ndarray], np.ndarray]


def pseudo_inverse_drift_solve(c, b, tol: float = 1e-10) -> np.ndarray:
    """Minimum-norm ``rho`` with ``c @ rho = b`` via the spectral decomposition.

    Eigenvalues below ``tol * max|eigenvalue|`` are treated as zero. Raises
    :class:`NoNumeraireError` when ``b`` is not in the range of ``c``, which
    in the model means arbitrage of the first kind.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if c.shape != (b.size, b.size):
        raise InvalidInputError(f"shape mismatch: c {c.shape}, b {b.shape}")
    if not np.allclose(c, c.T, rtol=1e-12, atol=1e-14):
        raise InvalidInputError("covariance matrix must be symmetric")
    return _pinv_solve_stack(c[None], b[None], tol)[0]


def _pinv_solve_stack(c: np.ndarray, b: np.ndarray, tol: float, path_ids=None, step=None):
    """Batched solve over a leading axis of covariance matrices."""
    lam, vec = np.linalg.eigh(c)
    scale = np.max(np.abs(lam), axis=-1, keepdims=True)
    keep = np.abs(lam) > tol * scale
    if np.any(lam < -tol * np.maximum(scale, 1e-300)):
        raise InvalidInputError("covariance matrix is not positive semidefinite")
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    coords = np.einsum("...ji,...j->...i", vec, b)
    rho = np.einsum("...ij,...j->...i", vec, inv * coords)
    resid = np.linalg.norm(np.einsum("...ij,...j->...i", c, rho) - b, axis=-1)
    # allowance for eigensolver roundoff on top of the relative tolerance
    bound = tol * np.linalg.norm(b, axis=-1) + 64 * np.finfo(float).eps * scale[..., 0] * np.linalg.norm(rho, axis=-1)
    bad = np.flatnonzero(resid > bound)
    if bad.size:
        i = int(bad[0])
        pid = None if path_ids is None else int(path_ids[i])
        where = "" if pid is None else f" at path {pid}, step {step}"
        raise NoNumeraireError(
            f"drift is not in the range of the covariance{where} "
            f"(residual {resid[i]:.3e}): arbitrage of the first kind",
            path_id=pid, step=step)
    return rho


@dataclass(frozen=True, eq=False)
class MarketModel:
    """``d`` assets driven by ``m`` Brownian motions.

    ``drift_fn(t, S)`` and ``vol_fn(t, S)`` receive prices of shape ``(n, d)``
    and return arrays of shape ``(n, d)`` and ``(n, d, m)``. When ``mu`` and
    ``sigma`` are set the coefficients are constant and simulation is
    vectorised over time.
    """

    d: int
    m: int
    s0: np.ndarray
    drift_fn: DriftFn
    vol_fn: VolFn
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    pinv_tol: float = 1e-10
    name: str = "custom"

    @property
    def constant(self) -> bool:
        return self.mu is not None and self.sigma is not None

    @classmethod
    def constant_coefficients(cls, mu, sigma, s0=None, pinv_tol=1e-10, name="gbm"):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        d = mu.size
        if sigma.shape[0] != d:
            raise InvalidInputError(f"sigma needs {d} rows, got shape {sigma.shape}")
        s0 = np.ones(d) if s0 is None else np.atleast_1d(np.asarray(s0, dtype=float))
        if s0.shape != (d,) or np.any(s0 <= 0):
            raise InvalidInputError("s0 must hold one positive price per asset")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise InvalidInputError("model coefficients must be finite")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        return cls(
            d=d, m=sigma.shape[1], s0=s0,
            drift_fn=lambda t, s: np.broadcast_to(mu, s.shape),
            vol_fn=lambda t, s: np.broadcast_to(sigma, (s.shape[0],) + sigma.shape),
            mu=mu, sigma=sigma, pinv_tol=pinv_tol, name=name)

    @classmethod
    def functional(cls, d, m, drift_fn, vol_fn, s0=None, pinv_tol=1e-10, name="custom"):
        s0 = np.ones(d) if s0 is None else np.atleast_1d(np.asarray(s0, dtype=float))
        return cls(d=d, m=m, s0=s0, drift_fn=drift_fn, vol_fn=vol_fn,
                   pinv_tol=pinv_tol, name=name)

    def coefficients(self, t: float, s: np.ndarray):
        b = np.asarray(self.drift_fn(t, s), dtype=float).reshape(s.shape[0], self.d)
        vol = np.asarray(self.vol_fn(t, s), dtype=float).reshape(s.shape[0], self.d, self.m)
        return b, vol

    @cached_property
    def kelly_proportions(self) -> np.ndarray:
        """``c^+ b`` for constant-coefficient models."""
        if not self.constant:
            raise InvalidInputError("kelly_proportions needs constant coefficients")
        return pseudo_inverse_drift_solve(self.sigma @ self.sigma.T, self.mu, self.pinv_tol)

    @cached_property
    def growth_rate(self) -> float:
        """``dG/dt = (b, c^+ b) / 2`` for constant-coefficient models."""
        return 0.5 * float(self.mu @ self.kelly_proportions)


def gbm_preset(mu=0.2, sigma=0.2) -> MarketModel:
    """One geometric Brownian motion; the defaults give Kelly fraction 5."""
    return MarketModel.constant_coefficients([mu], [[sigma]], name="gbm")


def dds_preset() -> MarketModel:
    """One asset with ``S_t = exp(t/2 + W_t)``.

    Its Kelly fraction is 1, so the numeraire is the asset itself and
    ``G_t = t/2``. Every numeraire portfolio has this law after a time change,
    which makes the preset a model-free stand-in for experiments that only
    depend on the law of the numeraire.
    """
    return MarketModel.constant_coefficients([1.0], [[1.0]], name="dds")


@dataclass(frozen=True, eq=False)
class SimBatch:
    """Simulated prices for paths ``path_ids`` on ``grid``.

    ``prices`` has shape ``(n, n_steps + 1, d)`` and ``increments`` (the
    Brownian increments) ``(n, n_steps, m)``.
    """

    model: MarketModel
    grid: TimeGrid
    seed: int
    path_ids: np.ndarray
    prices: np.ndarray
    increments: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.path_ids)

    @cached_property
    def returns(self) -> np.ndarray:
        """Per-step simple returns ``dS/S``, shape ``(n, n_steps, d)``."""
        return self.prices[:, 1:] / self.prices[:, :-1] - 1.0

    @cached_property
    def numeraire(self) -> "NumeraireBatch":
        return _numeraire_batch(self)


def simulate_batch(model: MarketModel, grid: TimeGrid, n_paths: int, seed: int,
                   first_path: int = 0) -> SimBatch:
    """Log-Euler simulation of paths ``first_path .. first_path + n_paths - 1``.

    Each step applies
    ``log S += (b - diag(c)/2) dt + sigma dW`` with ``dW ~ N(0, dt I)``,
    which is exact in law for constant coefficients. Path ``i`` depends only
    on ``(seed, i)``.
    """
    if int(n_paths) != n_paths or n_paths < 1:
        raise InvalidInputError(f"n_paths must be a positive integer, got {n_paths}")
    n, K, d, m, dt = int(n_paths), grid.n_steps, model.d, model.m, grid.dt
    path_ids = np.arange(first_path, first_path + n, dtype=np.int64)
    z = rng.path_normals(seed, path_ids, K * m).reshape(n, K, m)
    dw = z * np.sqrt(dt)
    # log(S / S0), so a path with no increments reproduces S0 exactly
    log_r = np.empty((n, K + 1, d))
    log_r[:, 0] = 0.0
    if model.constant:
        sig = model.sigma
        drift = (model.mu - 0.5 * np.sum(sig * sig, axis=1)) * dt
        np.cumsum(drift + dw @ sig.T, axis=1, out=log_r[:, 1:])
    else:
        for k in range(K):
            s_k = model.s0 * np.exp(log_r[:, k])
            b, vol = model.coefficients(k * dt, s_k)
            inc = (b - 0.5 * np.sum(vol * vol, axis=2)) * dt + np.einsum("nij,nj->ni", vol, dw[:, k])
            bad = ~np.all(np.isfinite(inc), axis=1)
            if bad.any():
                raise SimulationError("non-finite model coefficients",
                                      int(path_ids[np.flatnonzero(bad)[0]]), k)
            log_r[:, k + 1] = log_r[:, k] + inc
    return SimBatch(model, grid, int(seed), path_ids, model.s0 * np.exp(log_r), dw)


@dataclass(frozen=True, eq=False)
class NumerairePath:
    """The numeraire wealth, its growth process and the per-step ``rho``.

    ``log(wealth) - growth`` is the local martingale part.
    """

    wealth: SampledPath
    growth: SampledPath
    rho: np.ndarray

    @property
    def proportions(self) -> np.ndarray:
        # in an Ito market the Kelly fractions of wealth are rho itself
        return self.rho


@dataclass(frozen=True, eq=False)
class NumeraireBatch:
    wealth: np.ndarray
    growth: np.ndarray
    rho: np.ndarray


def _numeraire_batch(batch: SimBatch) -> NumeraireBatch:
    model, grid = batch.model, batch.grid
    n, K = batch.n_paths, grid.n_steps
    if model.constant:
        pi = model.kelly_proportions
        rho = np.broadcast_to(pi, (n, K, model.d))
        growth = np.broadcast_to(model.growth_rate * grid.times, (n, K + 1))
    else:
        rho = np.empty((n, K, model.d))
        growth = np.zeros((n, K + 1))
        for k in range(K):
            b, vol = model.coefficients(k * grid.dt, batch.prices[:, k])
            c = vol @ np.swapaxes(vol, 1, 2)
            rho[:, k] = _pinv_solve_stack(c, b, model.pinv_tol, batch.path_ids, k)
            growth[:, k + 1] = growth[:, k] + 0.5 * np.sum(b * rho[:, k], axis=1) * grid.dt
    wealth = _wealth_from_fraction_array(batch, rho)
    return NumeraireBatch(wealth=wealth, growth=growth, rho=rho)


def numeraire_path(batch: SimBatch, path_index: int) -> NumerairePath:
    """Numeraire portfolio of the ``path_index``-th path in the batch."""
    nb = batch.numeraire
    return NumerairePath(
        wealth=SampledPath(batch.grid, nb.wealth[path_index]),
        growth=SampledPath(batch.grid, nb.growth[path_index]),
        rho=np.asarray(nb.rho[path_index]))


def _wealth_from_fraction_array(batch: SimBatch, pi: np.ndarray) -> np.ndarray:
    factor = 1.0 + np.sum(pi * batch.returns, axis=-1)
    np.maximum(factor, 0.0, out=factor)
    wealth = np.empty((batch.n_paths, batch.grid.n_steps + 1))
    wealth[:, 0] = 1.0
    # a zero factor makes the product absorbing at 0
    np.cumprod(factor, axis=1, out=wealth[:, 1:])
    return wealth


def proportion_array(batch: SimBatch, proportions) -> np.ndarray:
    """Broadcast a proportion rule to shape ``(n, n_steps, d)``.

    ``proportions`` is a constant vector, a per-step ``(n_steps, d)`` table,
    a full ``(n, n_steps, d)`` array, or ``f(t, S)`` returning ``(n, d)``.
    """
    n, K, d = batch.n_paths, batch.grid.n_steps, batch.model.d
    if callable(proportions):
        out = np.empty((n, K, d))
        for k in range(K):
            out[:, k] = np.asarray(proportions(k * batch.grid.dt, batch.prices[:, k]),
                                   dtype=float).reshape(n, d)
    else:
        arr = np.asarray(proportions, dtype=float)
        try:
            out = np.broadcast_to(arr, (n, K, d))
        except ValueError:
            raise InvalidInputError(
                f"proportions of shape {arr.shape} do not fit {(n, K, d)}") from None
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("proportions must be finite")
    return out


def wealth_paths(batch: SimBatch, proportions) -> np.ndarray:
    """``X_{k+1} = X_k (1 + (pi_k, dS_k/S_k))`` clamped and absorbed at 0."""
    return _wealth_from_fraction_array(batch, proportion_array(batch, proportions))


def wealth_from_proportions(batch: SimBatch, path_index: int, proportions) -> SampledPath:
    return SampledPath(batch.grid, wealth_paths(batch, proportions)[path_index])
