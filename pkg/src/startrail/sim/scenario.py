"""Scenario description, TOML loading, dotted-key overrides and validation."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..types import ConfigError, NodeConfig
from ..workloads import DEFAULT_GROUP_BYTES, AccessPolicy
from .engine import LatencyModel


@dataclass(frozen=True)
class DatasetSpec:
    block_count: int = 2000
    block_size: int = 4096
    group_bytes: int = DEFAULT_GROUP_BYTES


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    node_count: int = 100
    bootstrap_count: int = 5
    provider_count: int = 2
    startrail_fraction: float = 0.0
    request_period: float = 30.0
    duration: float = 600.0
    fetch_timeout: float = 60.0
    run_seed: int = 1
    policy: AccessPolicy = field(default_factory=AccessPolicy)
    latency: LatencyModel = field(default_factory=LatencyModel)
    node_config: NodeConfig = field(default_factory=NodeConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)

    @property
    def client_count(self) -> int:
        return self.node_count - self.bootstrap_count - self.provider_count

    @property
    def startrail_count(self) -> int:
        return int(round(self.startrail_fraction * self.node_count, 9))

    def problems(self) -> list[tuple[str, str]]:
        out = []
        if self.node_count < 1:
            out.append(("node_count", "must be >= 1"))
        if self.bootstrap_count < 0:
            out.append(("bootstrap_count", "must be >= 0"))
        if self.provider_count < 0:
            out.append(("provider_count", "must be >= 0"))
        if self.bootstrap_count + self.provider_count > self.node_count:
            out.append(("bootstrap_count", "bootstrap_count + provider_count exceeds node_count"))
        if not 0 <= self.startrail_fraction <= 1:
            out.append(("startrail_fraction", "must be within [0, 1]"))
        if not self.request_period > 0:
            out.append(("request_period", "must be > 0"))
        if self.duration < 0:
            out.append(("duration", "must be >= 0"))
        if not self.fetch_timeout > 0:
            out.append(("fetch_timeout", "must be > 0"))
        out += self.policy.problems("policy.")
        lat = self.latency
        if lat.base_one_way < 0:
            out.append(("latency.base_one_way", "must be >= 0"))
        if lat.jitter < 0:
            out.append(("latency.jitter", "must be >= 0"))
        if lat.upload_bandwidth < 0:
            out.append(("latency.upload_bandwidth", "must be >= 0 (0 = unlimited)"))
        out += self.node_config.problems("node_config.")
        ds = self.dataset
        if ds.block_count < 1:
            out.append(("dataset.block_count", "must be >= 1"))
        if not 4 <= ds.block_size <= 262_144:
            out.append(("dataset.block_size", "must be within [4, 262144]"))
        if ds.group_bytes < 1:
            out.append(("dataset.group_bytes", "must be >= 1"))
        if self.duration > 0 and self.client_count > 0 and self.provider_count == 0:
            out.append(("provider_count", "requests are scheduled but no node holds the dataset"))
        return out

    def validate(self) -> Scenario:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    def with_overrides(self, overrides: dict[str, Any]) -> Scenario:
        data = to_dict(self)
        for dotted, value in overrides.items():
            _assign(data, dotted.split("."), value, dotted)
        return from_dict(data)

    def flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for key, value in to_dict(self).items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    out[f"{key}.{sub}"] = v
            else:
                out[key] = value
        return out


_SECTIONS = {
    "policy": AccessPolicy,
    "latency": LatencyModel,
    "node_config": NodeConfig,
    "dataset": DatasetSpec,
}


def to_dict(scenario: Scenario) -> dict[str, Any]:
    return dataclasses.asdict(scenario)


def _coerce(value: Any, like: Any, path: str) -> Any:
    if isinstance(like, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError([(path, f"expected a boolean, got {value!r}")])
    if isinstance(like, int):
        if isinstance(value, bool):
            raise ConfigError([(path, f"expected an integer, got {value!r}")])
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value.replace("_", ""))
            except ValueError:
                pass
        raise ConfigError([(path, f"expected an integer, got {value!r}")])
    if isinstance(like, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError([(path, f"expected a number, got {value!r}")])
    if isinstance(like, str):
        if isinstance(value, str):
            return value
        raise ConfigError([(path, f"expected a string, got {value!r}")])
    return value


def _assign(data: dict, keys: list[str], value: Any, dotted: str) -> None:
    node = data
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError([(dotted, "unknown key")])
        node = node[k]
    if keys[-1] not in node or isinstance(node[keys[-1]], dict):
        raise ConfigError([(dotted, "unknown key")])
    node[keys[-1]] = value


def from_dict(data: dict[str, Any]) -> Scenario:
    defaults = to_dict(Scenario())
    problems: list[tuple[str, str]] = []
    top: dict[str, Any] = {}
    for key, value in data.items():
        if key not in defaults:
            problems.append((key, "unknown key"))
            continue
        if key in _SECTIONS:
            if not isinstance(value, dict):
                problems.append((key, "expected a table"))
                continue
            sect = {}
            for sub, v in value.items():
                path = f"{key}.{sub}"
                if sub not in defaults[key]:
                    problems.append((path, "unknown key"))
                    continue
                try:
                    sect[sub] = _coerce(v, defaults[key][sub], path)
                except ConfigError as e:
                    problems += e.problems
            top[key] = _SECTIONS[key](**sect)
        else:
            try:
                top[key] = _coerce(value, defaults[key], key)
            except ConfigError as e:
                problems += e.problems
    if problems:
        raise ConfigError(problems)
    return Scenario(**top)


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError([(pair, "override must look like key=value")])
        out[key.strip()] = value.strip()
    return out


def bundled_scenarios() -> list[str]:
    root = resources.files("startrail") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_scenario_path(name_or_path: str) -> Path | None:
    path = Path(name_or_path)
    if path.is_file():
        return path
    bundled = resources.files("startrail") / "scenarios" / f"{name_or_path}.toml"
    if bundled.is_file():
        return Path(str(bundled))
    return None


def load_scenario(name_or_path: str, overrides: dict[str, Any] | None = None) -> Scenario:
    """Load a scenario file (or bundled scenario name) and apply overrides."""
    path = resolve_scenario_path(name_or_path)
    if path is None:
        raise FileNotFoundError(f"scenario not found: {name_or_path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError([(str(path), f"not valid TOML: {e}")]) from e
    scenario = from_dict(data)
    if "name" not in data:
        scenario = scenario.replace(name=path.stem)
    if overrides:
        scenario = scenario.with_overrides(overrides)
    return scenario
