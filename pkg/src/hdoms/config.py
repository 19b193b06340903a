"""Run configuration: defaults, key=value config files and CLI flags,
merged with precedence defaults < file < flags."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .fdr import FdrConfig
from .preprocess import PreprocessConfig
from .search import SearchConfig
from .spectra_io import DEFAULT_DECOY_PREFIX

__all__ = [
    "CONFIG_ENV_VAR",
    "ConfigFileError",
    "RunConfig",
    "load_config_file",
    "resolve_run_config",
]

CONFIG_ENV_VAR = "RAPIDOMS_CONFIG"


class ConfigFileError(ValueError):
    """A config file has an unknown key or an unparsable value."""


# Flat key space shared by config files and CLI flags (flag --bin-size is
# key bin_size and so on). Values are (type tag, default).
_SCHEMA: dict[str, tuple[str, object]] = {
    "rel_intensity_floor": ("float", 0.01),
    "bin_size": ("float", 0.05),
    "mz_min": ("float", 50.0),
    "mz_max": ("float", 2500.0),
    "levels": ("int", 64),
    "intensity_transform": ("str", "sqrt"),
    "drop_level_zero": ("bool", False),
    "dim": ("int", 4096),
    # Stream-width divisor of the original accelerator dataflow; accepted
    # for configuration parity but result-neutral here (the software kernel
    # always slices hypervectors into 64-bit words).
    "factor": ("int", 16),
    "seed": ("int", 1),
    "max_r": ("int", 4096),
    "cache_budget_bytes": ("int", 0),
    "tol_ppm": ("float", 20.0),
    "open_tol_da": ("float", 75.0),
    "q_block": ("int", 16),
    "max_q": ("int", 2048),
    "count_comparisons": ("bool", True),
    "fdr": ("float", 0.01),
    "conservative_plus_one": ("bool", False),
    "workers": ("int", 1),
    "decoy_prefix": ("str", DEFAULT_DECOY_PREFIX),
}

_BOOL_WORDS = {
    "true": True,
    "false": False,
    "1": True,
    "0": False,
    "yes": True,
    "no": False,
    "on": True,
    "off": False,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully merged configuration for one command invocation."""

    preprocess: PreprocessConfig
    search: SearchConfig
    fdr: FdrConfig
    dim: int
    seed: int
    max_r: int
    cache_budget_bytes: int
    workers: int
    decoy_prefix: str
    factor: int = 16


def _parse_value(key: str, raw: str, where: str) -> object:
    kind = _SCHEMA[key][0]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            value = _BOOL_WORDS.get(raw.strip().lower())
            if value is None:
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigFileError(
            f"{where}: cannot parse {key}={raw!r} as {kind}"
        ) from None


def load_config_file(path: str | Path) -> dict[str, object]:
    """Parse a UTF-8 key=value config file ('#' starts a comment line)."""
    values: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            key = key.strip()
            where = f"{path}:{lineno}"
            if not eq:
                raise ConfigFileError(f"{where}: expected key=value, got {line!r}")
            if key not in _SCHEMA:
                raise ConfigFileError(f"{where}: unknown config key {key!r}")
            values[key] = _parse_value(key, value.strip(), where)
    return values


def resolve_run_config(
    config_path: str | None, flag_values: dict[str, object]
) -> RunConfig:
    """Merge defaults, the config file and explicit flags into a RunConfig.

    The config file is the --config argument if given, else the file named
    by the RAPIDOMS_CONFIG environment variable, else nothing. Flags with
    value None count as "not given" and do not override.
    """
    merged = {key: default for key, (_, default) in _SCHEMA.items()}
    effective_path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if effective_path:
        merged.update(load_config_file(effective_path))
    for key, value in flag_values.items():
        if value is not None:
            if key not in _SCHEMA:
                raise KeyError(f"unknown config field {key!r}")
            merged[key] = value
    preprocess = PreprocessConfig(
        rel_intensity_floor=merged["rel_intensity_floor"],
        bin_size=merged["bin_size"],
        mz_min=merged["mz_min"],
        mz_max=merged["mz_max"],
        num_levels=merged["levels"],
        intensity_transform=merged["intensity_transform"],
        drop_level_zero=merged["drop_level_zero"],
    )
    search = SearchConfig(
        tol_ppm=merged["tol_ppm"],
        open_tol_da=merged["open_tol_da"],
        q_block=merged["q_block"],
        max_q=merged["max_q"],
        count_comparisons=merged["count_comparisons"],
    )
    fdr = FdrConfig(
        threshold=merged["fdr"],
        conservative_plus_one=merged["conservative_plus_one"],
    )
    if merged["dim"] % 64 != 0 or merged["dim"] < 64:
        raise ValueError("dim must be a positive multiple of 64")
    if merged["max_r"] < 1:
        raise ValueError("max_r must be at least 1")
    if merged["workers"] < 1:
        raise ValueError("workers must be at least 1")
    if merged["cache_budget_bytes"] < 0:
        raise ValueError("cache_budget_bytes must be non-negative (0 = unlimited)")
    return RunConfig(
        preprocess=preprocess,
        search=search,
        fdr=fdr,
        dim=merged["dim"],
        seed=merged["seed"],
        max_r=merged["max_r"],
        cache_budget_bytes=merged["cache_budget_bytes"],
        workers=merged["workers"],
        decoy_prefix=merged["decoy_prefix"],
        factor=merged["factor"],
    )
