"""One INI file configures the whole laboratory.

Four sections mirror the moving parts: ``[env]`` (simulator constants),
``[learner]`` (strategy-independent loop settings), ``[teacher]``
(demonstration source), ``[harness]`` (benchmark and experiment
orchestration). Every key is optional; omitted keys keep the defaults
below, and unknown sections or keys fail loudly rather than being
silently ignored.
"""

from __future__ import annotations

import math
from configparser import ConfigParser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .environment import EnvConfig


class ConfigError(ValueError):
    """Configuration file cannot be parsed or contains unknown keys."""


@dataclass
class LearnerSettings:
    total_episodes: int = 5000
    demo_period: float = 30
    eval_every: int = 1000
    n_im: int = 5
    eps_max: float = 0.05
    goal_budget: int = 12
    eps_goal: float = 0.05

    def learner_kwargs(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TeacherSettings:
    demonstrator: int = 2
    teacher_seed: int = 1000
    k_rep: int = 9
    source_episodes: int = 5000
    path: str | None = None          # pre-built demonstration set, optional

    def __post_init__(self):
        if self.demonstrator not in (1, 2, 3):
            raise ConfigError("teacher.demonstrator must be 1, 2 or 3")


@dataclass
class HarnessSettings:
    n_probe: int = 100_000
    resolution: int = 20
    bench_seed: int = 2024
    eval_seed: int = 777
    env_seed_base: int = 10_000
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    large_space: bool = False
    out_dir: str = "results"


@dataclass
class LabConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    learner: LearnerSettings = field(default_factory=LearnerSettings)
    teacher: TeacherSettings = field(default_factory=TeacherSettings)
    harness: HarnessSettings = field(default_factory=HarnessSettings)


_ENV_KEYS = {
    "link_lengths": "float_tuple",
    "rod_length": "float",
    "gravity": "float",
    "base_height": "float",
    "whip_speed": "float",
    "whip_width": "float",
    "scale": "float",
    "noise_base": "float",
    "noise_speed_gain": "float",
    "noise_enabled": "bool",
}
_LEARNER_KEYS = {
    "total_episodes": "int",
    "demo_period": "period",
    "eval_every": "int",
    "n_im": "int",
    "eps_max": "float",
    "goal_budget": "int",
    "eps_goal": "float",
}
_TEACHER_KEYS = {
    "demonstrator": "int",
    "teacher_seed": "int",
    "k_rep": "int",
    "source_episodes": "int",
    "path": "str",
}
_HARNESS_KEYS = {
    "n_probe": "int",
    "resolution": "int",
    "bench_seed": "int",
    "eval_seed": "int",
    "env_seed_base": "int",
    "seeds": "int_tuple",
    "large_space": "bool",
    "out_dir": "str",
}
_SECTIONS = {
    "env": _ENV_KEYS,
    "learner": _LEARNER_KEYS,
    "teacher": _TEACHER_KEYS,
    "harness": _HARNESS_KEYS,
}

_BOOL = {"true": True, "yes": True, "1": True,
         "false": False, "no": False, "0": False}


def _parse(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _BOOL[raw.lower()]
        if kind == "str":
            return raw
        if kind == "period":
            return math.inf if raw.lower() in ("inf", "none") else int(raw)
        if kind == "int_tuple":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "float_tuple":
            return tuple(float(v) for v in raw.split(",") if v.strip())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from exc
    raise ConfigError(f"{where}: unknown kind {kind}")   # pragma: no cover


def load_config(path=None) -> LabConfig:
    """Read an INI file into a LabConfig; no path means all defaults."""
    cfg = LabConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        keys = _SECTIONS[section]
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            value = _parse(keys[key], raw, f"[{section}] {key}")
            if section == "env":
                cfg.env = cfg.env.replace(**{key: value})
            else:
                setattr(getattr(cfg, section), key, value)
    # re-run validation that dataclass construction would have done
    TeacherSettings(demonstrator=cfg.teacher.demonstrator)
    return cfg


def default_config_text() -> str:
    """A template INI with every supported key at its default."""
    cfg = LabConfig()
    lines = ["# sgimlab configuration; every key is optional"]
    for section, keys in _SECTIONS.items():
        lines.append(f"\n[{section}]")
        holder = getattr(cfg, section)
        for key, kind in keys.items():
            value = getattr(holder, key)
            if value is None:
                lines.append(f"# {key} =")
                continue
            if kind in ("int_tuple", "float_tuple"):
                value = ", ".join(str(v) for v in value)
            elif kind == "period" and value == math.inf:
                value = "inf"
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
