"""Run configuration: one TOML file, relative paths resolved against it."""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_VERSION = 1
SAMPLING_MODES = ("greedy", "official-first-random")


class ConfigError(ValueError):
    pass


@dataclass
class InputsConfig:
    traceroutes: list[str] = field(default_factory=list)
    probes: Optional[str] = None
    geo: Optional[str] = None
    pfx2as: Optional[str] = None
    anycast: Optional[str] = None
    country_points: Optional[str] = None
    hint_rules: Optional[str] = None
    hostnames: Optional[str] = None
    bgp_snapshots: Optional[str] = None
    probe_location_boxes: Optional[str] = None


@dataclass
class SanitizeSection:
    bogons: Optional[str] = None
    squats: Optional[str] = None
    excluded_probes: Optional[str] = None
    excluded_fqdns: Optional[str] = None
    legacy_single_occurrence: bool = False


@dataclass
class ValidationSection:
    sol_fraction: float = 2.0 / 3.0
    one_way_divisor: float = 2.0


@dataclass
class BgpSection:
    min_days: int = 5


@dataclass
class CurateSection:
    seeds: Optional[str] = None
    suffix_table: Optional[str] = None
    cert_answers: Optional[str] = None
    dns_answers: Optional[str] = None
    port_answers: Optional[str] = None
    verdicts: Optional[str] = None
    live: bool = False
    sampling: str = "greedy"
    target_cap: int = 100
    probe_cap: int = 10
    random_seed: int = 0


@dataclass
class ReportSection:
    formats: list[str] = field(default_factory=lambda: ["csv"])
    citm_buckets: list[int] = field(default_factory=lambda: [0, 1, 2, 3])


@dataclass
class RunConfig:
    version: int = CONFIG_VERSION
    output_dir: str = "out"
    parallel: int = 1
    inputs: InputsConfig = field(default_factory=InputsConfig)
    sanitize: SanitizeSection = field(default_factory=SanitizeSection)
    validation: ValidationSection = field(default_factory=ValidationSection)
    bgp: BgpSection = field(default_factory=BgpSection)
    curate: CurateSection = field(default_factory=CurateSection)
    report: ReportSection = field(default_factory=ReportSection)
    base_dir: str = "."

    def require(self, section: str, *names: str) -> None:
        sec = getattr(self, section)
        missing = [n for n in names if not getattr(sec, n)]
        if missing:
            raise ConfigError(f"config [{section}] needs: {', '.join(missing)}")


_SECTIONS = {
    "inputs": InputsConfig,
    "sanitize": SanitizeSection,
    "validation": ValidationSection,
    "bgp": BgpSection,
    "curate": CurateSection,
    "report": ReportSection,
}
_PATH_FIELDS = {
    "inputs": {f.name for f in dataclasses.fields(InputsConfig)},
    "sanitize": {"bogons", "squats", "excluded_probes", "excluded_fqdns"},
    "curate": {"seeds", "suffix_table", "cert_answers", "dns_answers", "port_answers", "verdicts"},
}


def _build(cls, data: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return cls(**data)


def _resolve(base: str, p: str) -> str:
    return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))


def from_dict(data: dict, base_dir: str = ".") -> RunConfig:
    top = {k: v for k, v in data.items() if k not in _SECTIONS}
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = dict(data.get(name, {}))
        for key in _PATH_FIELDS.get(name, ()):
            value = raw.get(key)
            if isinstance(value, list):
                raw[key] = [_resolve(base_dir, v) for v in value]
            elif value:
                raw[key] = _resolve(base_dir, value)
        sections[name] = _build(cls, raw, f"[{name}]")
    cfg = _build(RunConfig, {**top, **sections, "base_dir": base_dir}, "top level")
    if cfg.version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {cfg.version}")
    cfg.output_dir = _resolve(base_dir, cfg.output_dir)
    if cfg.curate.sampling not in SAMPLING_MODES:
        raise ConfigError(f"sampling must be one of {SAMPLING_MODES}")
    if cfg.parallel < 1:
        raise ConfigError("parallel must be >= 1")
    _check_files(cfg)
    return cfg


def _check_files(cfg: RunConfig) -> None:
    for name in _PATH_FIELDS:
        sec = getattr(cfg, name)
        for key in sorted(_PATH_FIELDS[name]):
            value = getattr(sec, key)
            for p in value if isinstance(value, list) else [value]:
                if p and not os.path.exists(p):
                    raise ConfigError(f"[{name}] {key}: file not found: {p}")


def load(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data, os.path.dirname(os.path.abspath(path)))
