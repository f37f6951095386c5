"""Experiment configuration.

An INI file with three sections; every value is parsed as JSON, so vectors
and matrices are written as lists::

    [model]
    preset = "gbm"          ; "gbm", "dds" or "custom"
    mu = [0.2]
    sigma = [[0.2]]

    [experiment]
    alpha = 0.5
    n_paths = 2000

    [output]
    directory = "out"
    dump_samples = false

Unknown sections or keys are rejected. Command-line flags override values
from the file.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional


from .errors import InvalidInputError
from .market import MarketModel, dds_preset, gbm_preset
from .paths import TimeGrid


class ConfigError(InvalidInputError):
    """Malformed or inconsistent configuration."""


MODEL_KEYS = {"preset", "d", "mu", "sigma", "s0", "pinv_tol"}
OUTPUT_KEYS = {"directory", "dump_samples"}


@dataclass(frozen=True)
class ModelConfig:
    preset: str = "gbm"
    d: Optional[int] = None
    mu: Optional[list] = None
    sigma: Optional[list] = None
    s0: Optional[list] = None
    pinv_tol: float = 1e-10

    def build(self) -> MarketModel:
        if self.preset == "dds":
            return dds_preset()
        if self.preset == "gbm" and self.mu is None and self.sigma is None:
            return gbm_preset()
        if self.mu is None or self.sigma is None:
            raise ConfigError("a custom model needs both mu and sigma")
        try:
            model = MarketModel.constant_coefficients(self.mu, self.sigma, self.s0,
                                                      pinv_tol=self.pinv_tol, name=self.preset)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[model] {exc}") from None
        except ConfigError:
            raise
        except InvalidInputError as exc:
            raise ConfigError(f"[model] {exc}") from None
        if self.d is not None and model.d != self.d:
            raise ConfigError(f"[model] d = {self.d} but mu has {model.d} entries")
        return model


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob an experiment may read; ``None`` means the experiment default."""

    model: ModelConfig = field(default_factory=ModelConfig)
    alpha: Optional[float] = None
    alphas: Optional[list] = None
    level: Optional[float] = None
    n_paths: Optional[int] = None
    seed: int = 0
    dt: Optional[float] = None
    t_max: Optional[float] = None
    growth_horizon: Optional[float] = None
    max_n: Optional[int] = None
    n_list: Optional[list] = None
    eps: Optional[float] = None
    strategy: Optional[str] = None
    directory: str = "."
    dump_samples: bool = False

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return validate(replace(self, **kw))

    def get(self, name: str, default):
        v = getattr(self, name)
        return default if v is None else v

    def grid(self, default_dt: float, default_t_max: float) -> TimeGrid:
        return TimeGrid.from_horizon(self.get("dt", default_dt), self.get("t_max", default_t_max))

    def echo(self) -> dict:
        """Result-relevant settings (output location and threads excluded)."""
        out = {f"model.{f.name}": getattr(self.model, f.name) for f in fields(ModelConfig)}
        for f in fields(self):
            if f.name not in ("model", "directory", "dump_samples"):
                out[f.name] = getattr(self, f.name)
        return out


EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"model", "directory", "dump_samples"}


def _positive(name, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be a positive number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{name} must be an integer, got {v!r}")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    m = cfg.model
    if m.preset not in ("gbm", "dds", "custom"):
        raise ConfigError(f"unknown model preset {m.preset!r}")
    _positive("pinv_tol", m.pinv_tol)
    for name in ("alpha", "eps"):
        v = getattr(cfg, name)
        if v is not None and not (isinstance(v, (int, float)) and 0 <= v < 1):
            raise ConfigError(f"{name} must lie in [0, 1), got {v!r}")
    if cfg.alphas is not None:
        if not cfg.alphas or not all(isinstance(a, (int, float)) and 0 <= a < 1 for a in cfg.alphas):
            raise ConfigError(f"alphas must be a nonempty list in [0, 1), got {cfg.alphas!r}")
    for name in ("dt", "t_max", "growth_horizon", "level"):
        if getattr(cfg, name) is not None:
            _positive(name, getattr(cfg, name))
    for name in ("n_paths", "max_n"):
        if getattr(cfg, name) is not None:
            _positive(name, getattr(cfg, name), integer=True)
    if cfg.n_list is not None:
        if not cfg.n_list or not all(isinstance(n, int) and n >= 1 for n in cfg.n_list):
            raise ConfigError(f"n_list must be a nonempty list of positive integers, got {cfg.n_list!r}")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {cfg.seed!r}")
    return cfg


def _section(parser, name, allowed) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            raise ConfigError(f"[{name}] {key}: cannot parse {raw!r} as JSON") from None
    return out


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";",), default_section="__none__")
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    extra = set(parser.sections()) - {"model", "experiment", "output"}
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")
    model = _section(parser, "model", MODEL_KEYS)
    exp = _section(parser, "experiment", EXPERIMENT_KEYS)
    out = _section(parser, "output", OUTPUT_KEYS)
    cfg = ExperimentConfig(model=ModelConfig(**model), **exp, **out)
    if not isinstance(cfg.dump_samples, bool):
        raise ConfigError("dump_samples must be true or false")
    cfg = validate(cfg)
    if cfg.model.preset == "custom":
        cfg.model.build()  # surface dimension mismatches at load time
    return cfg
