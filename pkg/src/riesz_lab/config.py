"""YAML experiment configuration: parsing, sequence rules and presets.

Schema (all keys optional except ``params.stages`` when no list fixes it)::

    params:
      stages: 6
      p: "4*k + 8"        # int | list | rule "a*k + b" | "a*b**k + c"
      t: h_prev           # same forms, or the preset h_prev (t_k = h_{k-1})
      x_top: 0            # same forms; defaults to 0
      xi: uniform         # uniform | point | {offset: "a/b"} | list of these
    numeric:
      grid: 16384         # torus grid size N
      window: null        # correlation window N_c
      epsilon: 0.1
      replicas: 64
      seed: 0
      budget: 5           # stages scanned per greedy step
      threshold: 0.001
      max_steps: 50
      mode: averaged      # greedy: averaged | fixed
      stage: null         # stage m for kb-bound / section6 (default: last)
      z_points: 32
      seeds: 10           # oracle-check realizations
      horizon: null       # validate horizon (default: all stages)
      workers: 1
    output:
      dir: out
      formats: [json, csv]
"""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .construction import H_PREV, OrnsteinParams, make_params
from .errors import ParamsError

EXPERIMENTS = ("validate", "riesz-decay", "oracle-check", "greedy", "kb-bound", "phi-limit", "section6")
PRESETS = ("dyadic-odometer", "classic-ornstein", "degenerate-xi")

NUMERIC_DEFAULTS: dict[str, Any] = {
    "grid": 1 << 14,
    "window": None,
    "epsilon": 0.1,
    "replicas": 64,
    "seed": 0,
    "budget": 5,
    "threshold": 1e-3,
    "max_steps": 50,
    "mode": "averaged",
    "stage": None,
    "z_points": 32,
    "seeds": 10,
    "horizon": None,
    "workers": 1,
}


class ConfigError(ParamsError):
    """Malformed configuration file or rule string."""


_INT = r"[+-]?\d+"
_AFFINE = re.compile(rf"^(?:({_INT})\s*\*\s*)?(-)?k(?:\s*([+-])\s*(\d+))?$")
_EXPO = re.compile(rf"^(?:({_INT})\s*\*\s*)?(\d+)\s*(?:\*\*|\^)\s*k(?:\s*([+-])\s*(\d+))?$")


def parse_rule(rule: str):
    """Compile a sequence rule into a function of k.

    Accepted: an integer, ``a*k + b`` and ``a*b**k + c`` (``^`` also means
    power); the prefix ``p_k =`` / ``t_k =`` is ignored.
    """
    text = str(rule).strip()
    text = re.sub(r"^[a-zA-Z_]+\s*=\s*", "", text) if "=" in text else text
    text = text.replace(" ", "")
    if re.fullmatch(_INT, text):
        v = int(text)
        return lambda k: v
    m = _AFFINE.match(text)
    if m:
        a = int(m.group(1)) if m.group(1) else 1
        if m.group(2):
            a = -a
        b = int(m.group(4) or 0) * (-1 if m.group(3) == "-" else 1)
        return lambda k: a * k + b
    m = _EXPO.match(text)
    if m:
        a = int(m.group(1)) if m.group(1) else 1
        base = int(m.group(2))
        c = int(m.group(4) or 0) * (-1 if m.group(3) == "-" else 1)
        return lambda k: a * base**k + c
    raise ConfigError(f"malformed rule string {rule!r}: only affine 'a*k + b' and exponential 'a*b**k + c' forms are supported")


def _sequence(value, stages: int, name: str) -> list[int]:
    if isinstance(value, list):
        if len(value) != stages:
            raise ConfigError(f"{name} list has {len(value)} entries, expected {stages}")
        return [int(v) for v in value]
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer, list or rule")
    if isinstance(value, int):
        return [value] * stages
    f = parse_rule(value)
    return [f(k) for k in range(stages)]


def _is_hprev(value) -> bool:
    return isinstance(value, str) and value.replace(" ", "") in (H_PREV, "h_{k-1}", "t_k=h_{k-1}", "h_prev")


def params_from_config(section: dict) -> OrnsteinParams:
    if not isinstance(section, dict):
        raise ConfigError("params section must be a mapping")
    stages = section.get("stages")
    if stages is None:
        for key in ("p", "t", "x_top"):
            if isinstance(section.get(key), list):
                stages = len(section[key])
                break
        else:
            raise ConfigError("params.stages is required when no sequence is given as a list")
    stages = int(stages)
    if "p" not in section:
        raise ConfigError("params.p is required")
    p = _sequence(section["p"], stages, "p")
    t_raw = section.get("t", 0)
    t = H_PREV if _is_hprev(t_raw) else _sequence(t_raw, stages, "t")
    x_top = _sequence(section.get("x_top", 0), stages, "x_top")
    xi = section.get("xi", "uniform")
    if isinstance(xi, list):
        xi = [_xi_entry(v) for v in xi]
    else:
        xi = _xi_entry(xi)
    return make_params(p, t, x_top, xi, stages=stages)


def _xi_entry(v):
    if isinstance(v, dict):
        return {int(s): str(w) for s, w in v.items()}
    return v


@dataclass
class ExperimentConfig:
    params: dict
    numeric: dict = field(default_factory=lambda: dict(NUMERIC_DEFAULTS))
    output: dict = field(default_factory=lambda: {"dir": "out", "formats": ["json", "csv"]})
    source: str = ""

    def resolved(self) -> dict:
        """Everything that determines the run, for embedding in reports."""
        return {"params": copy.deepcopy(self.params), "numeric": dict(self.numeric), "output": {"formats": list(self.output["formats"])}}

    def build_params(self) -> OrnsteinParams:
        return params_from_config(self.params)


def config_from_dict(data: dict, source: str = "") -> ExperimentConfig:
    if not isinstance(data, dict) or "params" not in data:
        raise ConfigError("config must be a mapping with a 'params' section")
    numeric = dict(NUMERIC_DEFAULTS)
    extra = data.get("numeric") or {}
    unknown = set(extra) - set(NUMERIC_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown numeric keys: {sorted(unknown)}")
    numeric.update(extra)
    output = {"dir": "out", "formats": ["json", "csv"]}
    output.update(data.get("output") or {})
    bad = set(output["formats"]) - {"json", "csv"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    return ExperimentConfig(data["params"], numeric, output, source)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data, str(path))


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("riesz_lab").joinpath("presets", f"{name}.yaml").read_text(encoding="utf-8")
    return config_from_dict(yaml.safe_load(text), f"preset:{name}")
