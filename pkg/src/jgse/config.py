"""JSON run configuration: strict parsing into ``JgseConfig`` and back."""

from __future__ import annotations

import json
from dataclasses import asdict, fields

from .flog import FlogConfig
from .gist import GistConfig
from .pipeline import ConfigError, JgseConfig


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    allowed = {f.name for f in fields(cls) if f.init}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def jgse_config_from_dict(raw) -> JgseConfig:
    """Build a config, rejecting unknown keys and invalid values.

    ``gist`` and ``flog`` are nested objects; ``flog`` may not carry
    ``lambda_b``, ``lambda_omega`` or ``mask`` (those come from the grid and
    the screening stage).
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    gist = _build(GistConfig, raw.pop("gist", {}), "gist")
    flog_raw = raw.pop("flog", {})
    if isinstance(flog_raw, dict):
        bad = {"lambda_b", "lambda_omega", "mask"} & set(flog_raw)
        if bad:
            raise ConfigError(f"flog: keys {sorted(bad)} are set by the grid, not the config")
    flog = _build(FlogConfig, flog_raw, "flog")
    for key in ("lambda_b", "lambda_omega", "grid_span"):
        if key in raw and raw[key] is not None:
            if not isinstance(raw[key], list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw[key]):
                raise ConfigError(f"{key} must be a list of numbers")
            raw[key] = tuple(raw[key])
    for key in ("grid_points", "seed", "n_clusters"):
        if key in raw and raw[key] is not None and (
                not isinstance(raw[key], int) or isinstance(raw[key], bool)):
            raise ConfigError(f"{key} must be an integer")
    return _build(JgseConfig, {**raw, "gist": gist, "flog": flog}, "config")


def load_config(path) -> JgseConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return jgse_config_from_dict(raw)


def config_to_dict(cfg: JgseConfig) -> dict:
    """Plain-JSON snapshot that ``jgse_config_from_dict`` reads back."""
    out = asdict(cfg)
    out["flog"].pop("mask", None)
    out["flog"].pop("lambda_b", None)
    out["flog"].pop("lambda_omega", None)
    for key in ("lambda_b", "lambda_omega", "grid_span"):
        if out[key] is not None:
            out[key] = list(out[key])
    return out
