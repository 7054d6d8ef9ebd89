"""Scenario files: YAML descriptions of a simulated road segment.

A scenario fixes the RNG seed, the ledger/reputation parameters, and a set of
vehicles with time-phased behaviors:

* honest: beacons, sends authentic alerts at a rate, witnesses others'
  authentic alerts, and discloses forged ones
* forger: beacons, and additionally broadcasts `count` forged alerts in the
  phase (well-formed and signed, but reporting events that never happened)
* slanderer: beacons, and disputes `count` authentic alerts from others with
  false disclosures
* silent: registered but never transmits

Everything is validated up front; a malformed file raises ScenarioError
before any simulation starts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import yaml

from vanetrust.reputation import ALERT_LEVELS, AUTHENTIC, DEFAULT_ALPHA, DEFAULT_BETA, FORGED

BEHAVIOR_HONEST = "honest"
BEHAVIOR_FORGER = "forger"
BEHAVIOR_SLANDERER = "slanderer"
BEHAVIOR_SILENT = "silent"
BEHAVIORS = (BEHAVIOR_HONEST, BEHAVIOR_FORGER, BEHAVIOR_SLANDERER, BEHAVIOR_SILENT)

CREDENTIAL_NORMAL = "normal"
CREDENTIAL_SELF_SIGNED = "self_signed"  # rogue: never registered, forges its own cert
CREDENTIALS = (CREDENTIAL_NORMAL, CREDENTIAL_SELF_SIGNED)


class ScenarioError(Exception):
    """The scenario file is malformed."""


@dataclass(frozen=True)
class PhaseSpec:
    from_h: float
    to_h: float
    behavior: str
    alert_rate_per_h: float = 0.0
    count: int = 0
    level: int = 2


@dataclass(frozen=True)
class VehicleSpec:
    name: str
    position_km: float
    profile: tuple
    credential: str = CREDENTIAL_NORMAL
    identity_valid: bool = True

    def behavior_at(self, t_h: float) -> Optional[PhaseSpec]:
        for phase in self.profile:
            if phase.from_h <= t_h < phase.to_h:
                return phase
        return None


@dataclass(frozen=True)
class EventSpec:
    """Explicitly scheduled alert injection."""

    at_h: float
    vehicle: str
    level: int
    ground_truth: str
    position_km: Optional[float] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    duration_h: float
    vehicles: tuple
    events: tuple = ()
    block_interval_min: float = 10.0
    beacon_interval_s: float = 600.0
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    difficulty: int = 8
    cert_validity_days: float = 30.0
    road_length_km: float = 2.0
    radio_radius_km: float = 1.0
    density_window_km: float = 0.5
    witness_delay_s: float = 1.0
    disclosure_delay_s: float = 2.0
    key_update_every_h: float = 0.0

    @property
    def duration_ms(self) -> int:
        return int(self.duration_h * 3_600_000)

    @property
    def block_interval_ms(self) -> int:
        return int(self.block_interval_min * 60_000)

    @property
    def beacon_interval_ms(self) -> int:
        return int(self.beacon_interval_s * 1000)

    @property
    def cert_validity_ms(self) -> int:
        return int(self.cert_validity_days * 24 * 3_600_000)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def vehicle(self, name: str) -> VehicleSpec:
        for spec in self.vehicles:
            if spec.name == name:
                return spec
        raise KeyError(name)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def _pop_number(data: dict, key: str, default=None, *, minimum=None, positive=False):
    if key in data:
        value = data.pop(key)
    elif default is not None:
        value = default
    else:
        raise ScenarioError(f"missing required field '{key}'")
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"'{key}' must be a number, got {value!r}")
    if positive:
        _require(value > 0, f"'{key}' must be positive, got {value}")
    if minimum is not None:
        _require(value >= minimum, f"'{key}' must be >= {minimum}, got {value}")
    return value


def _no_leftovers(data: dict, where: str) -> None:
    _require(not data, f"unknown fields in {where}: {sorted(data)}")


def _parse_phase(raw, duration_h: float, where: str) -> PhaseSpec:
    _require(isinstance(raw, dict), f"{where} must be a mapping")
    data = dict(raw)
    from_h = _pop_number(data, "from_h", minimum=0)
    to_h = _pop_number(data, "to_h", positive=True)
    _require(from_h < to_h, f"{where}: from_h must be before to_h")
    _require(to_h <= duration_h, f"{where}: to_h exceeds the scenario duration")
    behavior = data.pop("behavior", None)
    _require(behavior in BEHAVIORS, f"{where}: behavior must be one of {BEHAVIORS}")
    rate = _pop_number(data, "alert_rate_per_h", 0.0, minimum=0)
    count = data.pop("count", 0)
    _require(isinstance(count, int) and count >= 0, f"{where}: count must be a non-negative integer")
    level = data.pop("level", 2)
    _require(level in ALERT_LEVELS, f"{where}: level must be one of {ALERT_LEVELS}")
    if behavior in (BEHAVIOR_FORGER, BEHAVIOR_SLANDERER):
        _require(count > 0, f"{where}: {behavior} phases need a positive count")
    _no_leftovers(data, where)
    return PhaseSpec(float(from_h), float(to_h), behavior, float(rate), count, level)


def _parse_vehicle(raw, duration_h: float, road_length_km: float) -> VehicleSpec:
    _require(isinstance(raw, dict), "each vehicle must be a mapping")
    data = dict(raw)
    name = data.pop("name", None)
    _require(isinstance(name, str) and name, "vehicle name must be a non-empty string")
    where = f"vehicle '{name}'"
    position = _pop_number(data, "position_km", minimum=0)
    _require(position <= road_length_km, f"{where}: position_km is off the road")
    profile_raw = data.pop("profile", None)
    _require(isinstance(profile_raw, list) and profile_raw, f"{where}: profile must be a non-empty list")
    phases = tuple(_parse_phase(p, duration_h, f"{where} phase {i}")
                   for i, p in enumerate(profile_raw))
    ordered = sorted(phases, key=lambda p: p.from_h)
    for a, b in zip(ordered, ordered[1:]):
        _require(a.to_h <= b.from_h, f"{where}: phases overlap at {b.from_h}h")
    credential = data.pop("credential", CREDENTIAL_NORMAL)
    _require(credential in CREDENTIALS, f"{where}: credential must be one of {CREDENTIALS}")
    identity_valid = data.pop("identity_valid", True)
    _require(isinstance(identity_valid, bool), f"{where}: identity_valid must be a boolean")
    _no_leftovers(data, where)
    return VehicleSpec(name, float(position), ordered, credential, identity_valid)


def _parse_event(raw, scenario_names: set, duration_h: float, index: int) -> EventSpec:
    where = f"event {index}"
    _require(isinstance(raw, dict), f"{where} must be a mapping")
    data = dict(raw)
    at_h = _pop_number(data, "at_h", minimum=0)
    _require(at_h < duration_h, f"{where}: at_h is past the scenario end")
    vehicle = data.pop("vehicle", None)
    _require(vehicle in scenario_names, f"{where}: unknown vehicle {vehicle!r}")
    level = data.pop("level", 2)
    _require(level in ALERT_LEVELS, f"{where}: level must be one of {ALERT_LEVELS}")
    truth = data.pop("ground_truth", AUTHENTIC)
    _require(truth in (AUTHENTIC, FORGED), f"{where}: ground_truth must be authentic or forged")
    position = data.pop("position_km", None)
    if position is not None:
        _require(isinstance(position, (int, float)), f"{where}: position_km must be a number")
        position = float(position)
    _no_leftovers(data, where)
    return EventSpec(float(at_h), vehicle, level, truth, position)


def parse_scenario(raw) -> Scenario:
    """Validate a parsed mapping into a Scenario; raises ScenarioError."""
    _require(isinstance(raw, dict), "scenario must be a mapping")
    data = dict(raw)
    name = data.pop("name", None)
    _require(isinstance(name, str) and name, "scenario name must be a non-empty string")
    seed = data.pop("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be a 64-bit integer")
    duration_h = _pop_number(data, "duration_h", positive=True)
    road_length = _pop_number(data, "road_length_km", 2.0, positive=True)

    vehicles_raw = data.pop("vehicles", None)
    _require(isinstance(vehicles_raw, list) and vehicles_raw, "vehicles must be a non-empty list")
    vehicles = tuple(_parse_vehicle(v, duration_h, road_length) for v in vehicles_raw)
    names = [v.name for v in vehicles]
    _require(len(set(names)) == len(names), "vehicle names must be unique")

    events_raw = data.pop("events", [])
    _require(isinstance(events_raw, list), "events must be a list")
    events = tuple(_parse_event(e, set(names), duration_h, i)
                   for i, e in enumerate(events_raw))

    difficulty = data.pop("difficulty", 8)
    _require(isinstance(difficulty, int) and 1 <= difficulty <= 32,
             "difficulty must be an integer between 1 and 32")

    scenario = Scenario(
        name=name,
        seed=seed,
        duration_h=float(duration_h),
        vehicles=vehicles,
        events=events,
        block_interval_min=float(_pop_number(data, "block_interval_min", 10.0, positive=True)),
        beacon_interval_s=float(_pop_number(data, "beacon_interval_s", 600.0, positive=True)),
        alpha=float(_pop_number(data, "alpha", DEFAULT_ALPHA, positive=True)),
        beta=float(_pop_number(data, "beta", DEFAULT_BETA, positive=True)),
        difficulty=difficulty,
        cert_validity_days=float(_pop_number(data, "cert_validity_days", 30.0, positive=True)),
        road_length_km=float(road_length),
        radio_radius_km=float(_pop_number(data, "radio_radius_km", 1.0, positive=True)),
        density_window_km=float(_pop_number(data, "density_window_km", 0.5, positive=True)),
        witness_delay_s=float(_pop_number(data, "witness_delay_s", 1.0, minimum=0)),
        disclosure_delay_s=float(_pop_number(data, "disclosure_delay_s", 2.0, minimum=0)),
        key_update_every_h=float(_pop_number(data, "key_update_every_h", 0.0, minimum=0)),
    )
    _no_leftovers(data, "scenario")
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"unparseable scenario file: {exc}") from exc
    return parse_scenario(raw)
