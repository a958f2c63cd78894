"""Scenario files: a line-oriented text format with four sections.

::

    # comments start with '#'
    [nodes]
    <id> <role>              # role: gnm | mother | element
    [links]
    <a> <b> <coefficient>    # coefficient: integer, decimal or n/d
    [params]
    <key> = <value>          # sizes, latency model, sync and counter settings
    [run]
    <key> = <value>          # strategy, rounds, seed, oids, ...

Every ``[params]``/``[run]`` key is optional except ``seed``. Counter rates
are set with ``rate.<oid> = <per-second rate>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

from emsnm.emsstore import HEALTH
from emsnm.errors import ParseError, ValidationError
from emsnm.mib import DEFAULT_RATES, canonical_oid, is_counter, is_registered
from emsnm.strategies import Strategy
from emsnm.topology import as_fraction

SECTIONS = ("nodes", "links", "params", "run")
ALL = "all"

_SIZE_KEYS = ("ma_size", "mda_size", "ma_res", "s_req", "s_res", "update_unit_size", "update_header_size")


@dataclass(frozen=True)
class Scenario:
    topology: dict[str, Any]
    seed: int
    strategies: tuple[Strategy, ...] = (Strategy.CS, Strategy.FLATBED, Strategy.HYBRID)
    rounds: int = 50
    max_domain_size: int = 10
    oids: tuple[str, ...] = ("int32.1",)
    metric: str = HEALTH
    ma_size: int = 5000
    mda_size: int = 2000
    ma_res: int = 200
    s_req: int = 100
    s_res: int = 100
    payload_growth: int = 0
    overhead_ms: float = 1.0
    ms_per_cost_unit: float = 0.001
    local_query_ms: float = 1.0
    round_period_ms: float = 1000.0
    sync_interval: Fraction = Fraction(5)
    update_unit_size: int = 20
    update_header_size: int = 40
    rates: dict[str, Fraction] = field(default_factory=lambda: dict(DEFAULT_RATES))
    jitter: bool = False
    name: str = "scenario"

    def __post_init__(self) -> None:
        validate(self)

    def with_overrides(self, seed: int | None = None, rounds: int | None = None) -> Scenario:
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if rounds is not None:
            changes["rounds"] = rounds
        return replace(self, **changes) if changes else self


def validate(sc: Scenario) -> None:
    if not isinstance(sc.seed, int):
        raise ValidationError("seed is required and must be an integer")
    if sc.rounds < 1:
        raise ValidationError(f"rounds must be >= 1, got {sc.rounds}")
    if sc.max_domain_size < 1:
        raise ValidationError("max_domain_size must be >= 1")
    for s in sc.strategies:
        if not isinstance(s, Strategy):
            raise ValidationError(f"unknown strategy {s!r}")
    for key in _SIZE_KEYS:
        if getattr(sc, key) <= 0:
            raise ValidationError(f"{key} must be > 0")
    if sc.payload_growth < 0:
        raise ValidationError("payload_growth must be >= 0")
    if sc.overhead_ms < 0 or sc.ms_per_cost_unit < 0 or sc.local_query_ms < 0:
        raise ValidationError("latency parameters must be >= 0")
    if sc.round_period_ms <= 0 or sc.sync_interval <= 0:
        raise ValidationError("round_period_ms and sync_interval must be > 0")
    for oid in sc.oids:
        if not is_registered(oid):
            raise ValidationError(f"unregistered oid {oid!r}")
    if sc.metric != HEALTH and not is_registered(sc.metric):
        raise ValidationError(f"metric must be 'health' or a registered oid, got {sc.metric!r}")
    for oid, rate in sc.rates.items():
        if not is_registered(oid):
            raise ValidationError(f"rate for unregistered oid {oid!r}")
        if rate < 0:
            raise ValidationError(f"negative rate for {oid}")


def parse_strategies(text: str) -> tuple[Strategy, ...]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    if names == [ALL]:
        return tuple(Strategy)
    out = []
    for name in names:
        try:
            out.append(Strategy(name))
        except ValueError:
            raise ValidationError(f"unknown strategy {name!r} (expected cs, flatbed, hybrid or all)") from None
    if not out:
        raise ValidationError("strategy is empty")
    return tuple(dict.fromkeys(out))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_INT_KEYS = {"rounds", "max_domain_size", "seed", "payload_growth", *_SIZE_KEYS}
_FLOAT_KEYS = {"overhead_ms", "ms_per_cost_unit", "local_query_ms", "round_period_ms"}
_KEY_VALUE = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.*)$")


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse scenario text; see the module docstring for the format.

    Raises:
        ParseError: malformed line or unknown section/key.
        ValidationError: well-formed but invalid values (missing seed, bad strategy, ...).
    """
    section = None
    nodes: list[tuple[int, str]] = []
    links: list[tuple[int, int, Fraction]] = []
    settings: dict[str, Any] = {}
    rates: dict[str, Fraction] = dict(DEFAULT_RATES)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip().lower() not in SECTIONS:
                raise ParseError(f"unknown section {line!r}", lineno)
            section = line[1:-1].strip().lower()
            continue
        if section is None:
            raise ParseError("content before the first section header", lineno)
        try:
            if section == "nodes":
                node_id, role = line.split()
                nodes.append((int(node_id), role.lower()))
            elif section == "links":
                a, b, coeff = line.split()
                links.append((int(a), int(b), as_fraction(coeff)))
            else:
                match = _KEY_VALUE.match(line)
                if match is None:
                    raise ValueError("expected 'key = value'")
                key, value = match.group(1), match.group(2).strip()
                if key.startswith("rate."):
                    oid = canonical_oid(key[len("rate.") :])
                    rates[oid] = as_fraction(value)
                else:
                    field_name = "strategies" if key == "strategy" else key
                    if field_name in settings:
                        raise ValueError(f"duplicate key {key!r}")
                    settings[field_name] = _convert(key, value)
        except ValidationError:
            raise
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(str(exc) or f"malformed line {raw!r}", lineno) from None

    if "seed" not in settings:
        raise ValidationError("scenario must set a seed in [run]")
    settings["rates"] = rates
    return Scenario(topology={"nodes": nodes, "links": links}, name=name, **settings)


def _convert(key: str, value: str) -> Any:
    if key == "strategy":
        return parse_strategies(value)
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key == "sync_interval":
        return as_fraction(value)
    if key == "jitter":
        return _parse_bool(value)
    if key == "oids":
        return tuple(canonical_oid(t.strip()) for t in value.split(",") if t.strip())
    if key == "metric":
        return value if value == HEALTH else canonical_oid(value)
    raise ValueError(f"unknown key {key!r}")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, name=path.stem)


def counter_oids(sc: Scenario) -> list[str]:
    return [oid for oid, rate in sc.rates.items() if is_counter(oid) and rate > 0]
