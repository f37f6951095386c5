"""Sampled paths on a uniform grid, running maxima and grid stopping times.

Every function here accepts either a :class:`SampledPath` or a plain array.
Arrays may be two-dimensional, in which case time runs along the last axis
and each row is treated as an independent path. The return type follows the
input: a path in, a path out.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .errors import InvalidInputError

#: Sentinel grid index for a stopping time that never fires on the grid.
#: Being the largest int64 keeps ``min`` and comparisons total.
INFINITY: int = int(np.iinfo(np.int64).max)

StopIndex = int


def is_finite_index(index) -> bool:
    return int(index) != INFINITY


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise InvalidInputError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidInputError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_horizon(cls, dt: float, t_max: float) -> "TimeGrid":
        n = int(round(t_max / dt))
        return cls(dt=dt, n_steps=max(n, 1))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def t_max(self) -> float:
        return self.n_steps * self.dt


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Nonnegative values on a :class:`TimeGrid` (``n_steps + 1`` points)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.grid.n_steps + 1:
            raise InvalidInputError(
                f"expected {self.grid.n_steps + 1} values, got shape {v.shape}")
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise InvalidInputError("path values must be nonnegative numbers")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, dt: float = 1.0) -> "SampledPath":
        values = np.asarray(values, dtype=float)
        return cls(TimeGrid(dt, values.size - 1), values)

    def __len__(self):
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def with_values(self, values) -> "SampledPath":
        return SampledPath(self.grid, values)


PathLike = Union[SampledPath, np.ndarray, Iterable[float]]


def _unwrap(path: PathLike) -> tuple[np.ndarray, Optional[TimeGrid]]:
    if isinstance(path, SampledPath):
        return path.values, path.grid
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise InvalidInputError("path must be nonempty")
    return arr, None


def _wrap(values: np.ndarray, grid: Optional[TimeGrid]):
    return SampledPath(grid, values) if grid is not None else values


def running_max(path: PathLike):
    """Prefix maximum along time."""
    x, grid = _unwrap(path)
    if x.shape[-1] == 0:
        raise InvalidInputError("path must be nonempty")
    return _wrap(np.maximum.accumulate(x, axis=-1), grid)


def relative_drawdown(path: PathLike):
    """``X / X*``: equals 1 at every time of maximum, lies in [0, 1]."""
    x, grid = _unwrap(path)
    if np.any(x[..., 0] <= 0):
        raise InvalidInputError("relative drawdown needs a positive starting value")
    m = np.maximum.accumulate(x, axis=-1)
    return _wrap(x / m, grid)


def first_true(mask: np.ndarray, after=None) -> np.ndarray:
    """First index ``k > after`` where ``mask`` holds, per row, else INFINITY.

    ``after=None`` searches from index 0. ``after`` may be a scalar or one
    entry per row; an INFINITY entry yields INFINITY.
    """
    mask = np.asarray(mask, dtype=bool)
    pos = np.arange(mask.shape[-1])
    if after is not None:
        after = np.asarray(after, dtype=np.int64)
        if after.ndim:
            after = after[..., None]
        mask = mask & (pos > after)
    hit = mask.any(axis=-1)
    idx = np.argmax(mask, axis=-1).astype(np.int64)
    return np.where(hit, idx, INFINITY)


def _as_stop(result):
    return int(result) if np.ndim(result) == 0 else result


def first_hit_level(path: PathLike, level: float, after: Optional[StopIndex] = None):
    """Smallest grid index past ``after`` with ``value >= level``.

    With ``level = exp(l)`` on a numeraire path this realises the log-scale
    hitting time of level ``l``.
    """
    if not level > 0:
        raise InvalidInputError(f"level must be positive, got {level}")
    x, _ = _unwrap(path)
    return _as_stop(first_true(x >= level, after))


def first_drawdown_hit(path: PathLike, alpha: float, after: Optional[StopIndex] = None):
    """Smallest grid index past ``after`` with ``X/X* <= alpha``."""
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    x, _ = _unwrap(path)
    rd = x / np.maximum.accumulate(x, axis=-1)
    return _as_stop(first_true(rd <= alpha, after))


def is_time_of_maximum(path: PathLike, t: StopIndex, tol: float = 1e-12) -> bool:
    # the never-firing time counts as a time of maximum
    if not is_finite_index(t):
        return True
    x, _ = _unwrap(path)
    if x.ndim != 1:
        raise InvalidInputError("is_time_of_maximum expects a single path")
    if not 0 <= t < x.size:
        raise InvalidInputError(f"index {t} is off the grid")
    m = np.max(x[: t + 1])
    return bool(abs(x[t] - m) <= tol * m)


def write_path_csv(path: SampledPath, out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "value"])
    for t, v in zip(path.times, path.values):
        writer.writerow([f"{t:.15g}", repr(float(v))])


def read_path_csv(src: Union[TextIO, str]) -> SampledPath:
    if isinstance(src, str):
        src = io.StringIO(src)
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["t", "value"]:
        raise InvalidInputError("path CSV must start with header 't,value'")
    rows = [r for r in reader if r]
    if len(rows) < 2:
        raise InvalidInputError("path CSV needs at least two rows")
    try:
        t = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise InvalidInputError(f"malformed path CSV: {exc}") from None
    dt = t[1] - t[0]
    if abs(t[0]) > 1e-12 or dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise InvalidInputError("path CSV times must form a uniform grid starting at 0")
    return SampledPath(TimeGrid(float(dt), len(rows) - 1), v)
