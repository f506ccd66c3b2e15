"""Flat key = value experiment config files.

Grammar: `[section]` headers start an experiment; each following
`key = value` line sets one field; lists are comma-separated; `#`
starts a comment. Each section expands into one ExperimentConfig per
method listed under its `methods` key.

Recognized keys (defaults in parentheses):
    objective   toy1d | hdbo200 | csv:PATH          (required)
    methods     comma list of acquisition names     (required)
    horizon     number of adaptive iterations       (required)
    seeds       comma list and/or A..B ranges       (required)
    kernel      rbf | linear                        (rbf)
    n_warmup    warm-up observations                (10)
    delta       confidence level parameter          (0.2)
    beta_filter sqrt-beta used for ROI filtering    (0.2)
    beta_trace  beta_t for optimum-interval widths  (2.0)
    beta_acq    sqrt-beta for acquisition bounds    (sqrt 2)
    refit_interval  hyperparameter refit cadence    (1)
    pool_size   synthetic pool size                 (1000 toy1d / 2000 hdbo200)
    pool_seed   seed for synthetic pool generation  (0)
    noise_std   observation noise                   (0.0)
    intersection_mode  per_step | historical        (per_step)
    filter_schedule    true | false                 (false)
    n_restarts  hyperparameter search restarts      (8)
    standardize true | false                        (true)

Method names: ici, rci, rts, or family-scope pairs such as ciwidth-global,
ucb-roi, ts-global, ei-roi (families ucb, ts, ei, ciwidth; scopes global,
roi, intersect).
"""

from __future__ import annotations

import math

from .bench import ExperimentConfig, ObjectiveSpec
from .core import FAMILIES, SCOPES, AcquisitionSpec


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "objective", "methods", "horizon", "seeds", "kernel", "n_warmup",
    "delta", "beta_filter", "beta_trace", "beta_acq", "refit_interval",
    "pool_size", "pool_seed", "noise_std", "intersection_mode",
    "filter_schedule", "n_restarts", "standardize",
}

_REQUIRED_KEYS = ("objective", "methods", "horizon", "seeds")


def parse_method(name: str) -> AcquisitionSpec:
    name = name.strip().lower()
    try:
        if name in FAMILIES:
            return AcquisitionSpec(family=name)
        if "-" in name:
            family, _, scope = name.partition("-")
            if family in FAMILIES and scope in SCOPES:
                return AcquisitionSpec(family=family, scope=scope)
    except ValueError as exc:
        raise ConfigError(f"method {name!r}: {exc}")
    raise ConfigError(f"unknown method {name!r}")


def _parse_seeds(value: str):
    seeds = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, _, b = part.partition("..")
            try:
                lo, hi = int(a), int(b)
            except ValueError:
                raise ConfigError(f"bad seed range {part!r}")
            if hi < lo:
                raise ConfigError(f"bad seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            try:
                seeds.append(int(part))
            except ValueError:
                raise ConfigError(f"bad seed {part!r}")
    if len(set(seeds)) != len(seeds):
        dupes = sorted({s for s in seeds if seeds.count(s) > 1})
        raise ConfigError(f"duplicate seeds: {dupes}")
    if not seeds:
        raise ConfigError("empty seed list")
    return tuple(seeds)


def _parse_bool(key, value):
    v = value.strip().lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"key {key!r}: expected true/false, got {value!r}")


def _num(key, value, cast):
    try:
        return cast(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: bad value {value!r}")


def _section_to_configs(name, kv):
    for req in _REQUIRED_KEYS:
        if req not in kv:
            raise ConfigError(f"section [{name}]: missing required key {req!r}")

    obj_raw = kv["objective"].strip()
    noise = _num("noise_std", kv.get("noise_std", "0"), float)
    if obj_raw.startswith("csv:"):
        objective = ObjectiveSpec("tabular", noise_std=noise, path=obj_raw[4:])
    elif obj_raw in ("toy1d", "hdbo200"):
        objective = ObjectiveSpec(obj_raw, noise_std=noise)
    else:
        raise ConfigError(f"section [{name}]: unknown objective {obj_raw!r}")

    default_pool = 2000 if objective.name == "hdbo200" else 1000
    seeds = _parse_seeds(kv["seeds"])
    methods = [m for m in (s.strip() for s in kv["methods"].split(",")) if m]
    if not methods:
        raise ConfigError(f"section [{name}]: empty methods list")

    configs = []
    for method in methods:
        spec = parse_method(method)
        try:
            configs.append(ExperimentConfig(
                name=name,
                objective=objective,
                acquisition=spec,
                kernel=kv.get("kernel", "rbf").strip().lower(),
                horizon=_num("horizon", kv["horizon"], int),
                n_warmup=_num("n_warmup", kv.get("n_warmup", "10"), int),
                seeds=seeds,
                delta=_num("delta", kv.get("delta", "0.2"), float),
                beta_sqrt_filter=_num("beta_filter", kv.get("beta_filter", "0.2"), float),
                beta_trace=_num("beta_trace", kv.get("beta_trace", "2.0"), float),
                beta_sqrt_acq=_num(
                    "beta_acq", kv.get("beta_acq", str(math.sqrt(2.0))), float
                ),
                refit_interval=_num("refit_interval", kv.get("refit_interval", "1"), int),
                pool_size=_num("pool_size", kv.get("pool_size", str(default_pool)), int),
                pool_seed=_num("pool_seed", kv.get("pool_seed", "0"), int),
                intersection_mode=kv.get("intersection_mode", "per_step").strip(),
                filter_schedule=_parse_bool(
                    "filter_schedule", kv.get("filter_schedule", "false")
                ),
                n_restarts=_num("n_restarts", kv.get("n_restarts", "8"), int),
                standardize=_parse_bool("standardize", kv.get("standardize", "true")),
            ))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"section [{name}]: {exc}")
    return configs


def parse_config(path):
    """Parse a config file into a list of ExperimentConfig objects."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    sections = []  # (name, {key: value})
    current = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), {})
            if not current[0]:
                raise ConfigError(f"line {lineno}: empty section name")
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if current is None:
            current = ("default", {})
            sections.append(current)
        if key in current[1]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        current[1][key] = value
    if not sections:
        raise ConfigError(f"{path}: no experiment sections found")
    configs = []
    for name, kv in sections:
        configs.extend(_section_to_configs(name, kv))
    return configs
