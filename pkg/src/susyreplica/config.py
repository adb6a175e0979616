"""Run configuration: flat dotted keys, YAML/JSON files, command-line overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import yaml

__all__ = ["ConfigError", "DEFAULTS", "RunConfig"]


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


DEFAULTS: dict = {
    "quad.finite_order": 64,
    "quad.halfline_order": 24,
    "quad.halfline_panels": 8,
    "quad.u_max": 40.0,
    "quad.eta_ladder": [1e-2, 5e-3, 2.5e-3, 1.25e-3],
    "cheb.degree": 48,
    "cheb.interval_fermionic": [0.2, 1.2],
    "cheb.interval_bosonic": [0.3, 2.0],
    "pfkp.points": 20,
    "pfkp.gauge": 1.0,
    "pfkp.tol": 1e-5,
    "fd.h": 1e-3,
    "fd.h_high": 2e-2,
    "fd.min_order": 1.8,
    "tau.s_fermionic": [[0.3, -0.5], [0.0, -1.1]],
    "tau.s_bosonic": [5.0, 8.0],
    "tau.tol": 1e-4,
    "tau.projection_tol": 1e-7,
    "virasoro.form": "uncorrected",
    "curves.r2_range": [0.05, 10.0],
    "curves.z_range": [0.1, 4.0],
    "curves.resolution": 200,
    "curves.tail_tol": 1e-9,
    "goe.N": 400,
    "goe.samples": 3000,
    "goe.seed": 20240601,
    "goe.bulk_window": 0.35,
    "goe.bin_width": 0.25,
    "goe.omega_max": 3.0,
    "goe.unfold_scale": 1.0,
    "goe.density_correction": True,
    "goe.compare_range": [0.25, 3.0],
    "run.threads": 1,
    "run.out": "out",
}

_POSITIVE = {
    "quad.finite_order", "quad.halfline_order", "quad.halfline_panels", "quad.u_max", "cheb.degree",
    "pfkp.points", "pfkp.gauge", "pfkp.tol", "fd.h", "fd.h_high", "fd.min_order", "tau.tol",
    "tau.projection_tol", "curves.resolution", "curves.tail_tol", "goe.N", "goe.samples",
    "goe.bulk_window", "goe.bin_width", "goe.omega_max", "goe.unfold_scale", "run.threads",
}
_NON_RESULT_KEYS = {"run.threads", "run.out"}
_INTERVALS = {"cheb.interval_fermionic", "cheb.interval_bosonic", "curves.r2_range", "curves.z_range",
              "goe.compare_range"}


def _coerce(key, value):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{key}: expected an integer")
        return int(value)
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number") from None
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list")
        return _numeric_leaves(key, value)
    return value


def _numeric_leaves(key, value):
    # YAML 1.1 reads 1e-3 (no dot) as a string, so list entries are coerced here
    if isinstance(value, (list, tuple)):
        return [_numeric_leaves(key, v) for v in value]
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected numbers")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected numbers, got {value!r}") from None


@dataclass
class RunConfig:
    """Validated flat configuration; ``values`` maps dotted keys to values."""

    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        """Defaults, then the file at ``path``, then ``key=value`` overrides."""
        values = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                with open(path) as fh:
                    data = yaml.safe_load(fh) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError("config file must hold a mapping of dotted keys")
            values.update(cls._checked(data))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override '{item}' is not key=value")
            key, raw = item.split("=", 1)
            values.update(cls._checked({key.strip(): yaml.safe_load(raw)}))
        cfg = cls(values)
        cfg.validate()
        return cfg

    @staticmethod
    def _checked(data: dict) -> dict:
        out = {}
        for key, value in data.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key '{key}'")
            out[key] = _coerce(key, value)
        return out

    def validate(self):
        v = self.values
        for key in _POSITIVE:
            if not v[key] > 0:
                raise ConfigError(f"{key} must be positive")
        for key in _INTERVALS:
            a, b = v[key]
            if not 0 < a < b:
                raise ConfigError(f"{key} must satisfy 0 < a < b")
        eta = v["quad.eta_ladder"]
        if len(eta) < 2 or any(x <= 0 for x in eta) or any(b >= a for a, b in zip(eta, eta[1:])):
            raise ConfigError("quad.eta_ladder must be positive and strictly decreasing")
        if v["virasoro.form"] not in ("uncorrected", "corrected"):
            raise ConfigError("virasoro.form must be 'uncorrected' or 'corrected'")
        if not 0 <= v["goe.seed"] < 2**64:
            raise ConfigError("goe.seed must be an unsigned 64-bit integer")
        if not 0 < v["goe.bulk_window"] < 1:
            raise ConfigError("goe.bulk_window must lie in (0, 1)")
        for s in v["tau.s_fermionic"]:
            if not (isinstance(s, (list, tuple)) and len(s) == 2):
                raise ConfigError("tau.s_fermionic entries are [re, im] pairs")
        if any(float(s) <= 0 for s in v["tau.s_bosonic"]):
            raise ConfigError("tau.s_bosonic entries must be real and positive")

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, value):
        self.values.update(self._checked({key: value}))
        self.validate()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.values, sort_keys=True, default_flow_style=None)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of every key that can change results.

        The worker count and output directory are left out: they never change
        a number, and leaving them in would make otherwise identical runs differ.
        """
        relevant = {k: v for k, v in self.values.items() if k not in _NON_RESULT_KEYS}
        blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
