"""Experiment configuration: sectioned ``key = value`` files or JSON.

Values in the INI form are parsed as JSON when possible, then as a
comma-separated list of JSON scalars, and are otherwise kept as strings::

    [experiment]
    kind = nnd_noise_grid
    seeds = 0, 1, 2

    [data]
    family = gaussian_mixture
    dim = 2
    means = [[0, 0]]
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataFormatError

KINDS = ("metrics", "nnd_noise_grid", "adversarial", "monotonicity", "train_gan", "comp_sweep", "dataset")
PRESET_NAMES = ("desk", "paper")


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part.strip()]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return text


@dataclass
class ExperimentConfig:
    kind: str
    seeds: list = field(default_factory=lambda: [0])
    preset: str = "desk"
    sections: dict = field(default_factory=dict)  # section name -> dict of parsed values
    out: Path | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if isinstance(self.seeds, int):
            self.seeds = [self.seeds]
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for s in self.seeds:
            if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2 ** 64:
                raise ConfigError(f"seed {s!r} is not a 64-bit unsigned integer")

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def check_paths(self):
        """Every ``*_path`` value must name an existing file."""
        for sec, values in self.sections.items():
            for key, v in values.items():
                if key.endswith("_path") and v and not Path(v).exists():
                    raise DataFormatError(f"[{sec}] {key}: no such file {v}")

    def echo(self) -> dict:
        return {"kind": self.kind, "seeds": list(self.seeds), "preset": self.preset,
                "sections": {k: dict(v) for k, v in sorted(self.sections.items())}}


def config_from_dict(d: dict, kind=None) -> ExperimentConfig:
    d = dict(d)
    exp = dict(d.pop("experiment", {}))
    file_kind = exp.pop("kind", None) or d.pop("kind", None)
    if kind and file_kind and file_kind != kind:
        raise ConfigError(f"config describes a {file_kind!r} experiment, expected {kind!r}")
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("experiment kind is missing")
    seeds = exp.pop("seeds", d.pop("seeds", [0]))
    preset = exp.pop("preset", d.pop("preset", "desk"))
    sections = {k: dict(v) for k, v in d.items() if isinstance(v, dict)}
    stray = [k for k, v in d.items() if not isinstance(v, dict)]
    if stray:
        raise ConfigError(f"top-level keys must be sections: {', '.join(stray)}")
    if exp:
        sections["experiment"] = exp
    return ExperimentConfig(kind=kind, seeds=seeds, preset=preset, sections=sections)


def load_config(path, kind=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read config {path}: {exc.strerror}") from exc
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return config_from_dict(raw, kind)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raw = {sec: {k: parse_value(v) for k, v in cp.items(sec)} for sec in cp.sections()}
    return config_from_dict(raw, kind)
