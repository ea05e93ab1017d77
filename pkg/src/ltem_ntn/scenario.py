"""Scenario files: one JSON document wiring every module's inputs together."""

import copy
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .constants import PhysicalConstants
from .linkbudget import TABLE2_FIXTURES, LinkBudgetInput, snr
from .mobility import ConstellationPlane
from .orbit import OrbitScenario, rtt_transparent
from .retx import BlerCurve, RetxPolicy, WaterfallCurve, combining_gain_dB, figure_policies
from .sync import SyncLimits
from .timers import TimerConfig


class ConfigError(ValueError):
    pass


CURVE_FAMILIES = {"waterfall": WaterfallCurve, "logistic": BlerCurve}


@dataclass
class RetxSection:
    family: str = "waterfall"  # or "logistic"
    # order (waterfall) or slope in 1/dB (logistic)
    steepness: float = 3.0
    calibration_budget: str = "geo_dl"
    # target BLER is reached after this many combined copies at the budget SNR
    calibration_repetitions: int = 4
    target_bler: float = 0.1
    # explicit curve overrides calibration
    snr50_dB: Optional[float] = None
    policies: List[RetxPolicy] = field(default_factory=list)

    def __post_init__(self):
        if self.family not in CURVE_FAMILIES:
            raise ConfigError(f"retx.family must be one of {sorted(CURVE_FAMILIES)}")
        if self.calibration_repetitions < 1:
            raise ConfigError("retx.calibration_repetitions must be >= 1")


@dataclass
class TimerSection:
    config: TimerConfig
    rtt_orbit: Optional[str] = "geo"
    rtt_ms: Optional[float] = None
    grant_issue_delay_ms: float = 0.0
    preamble_attempts_max: int = 1
    n_pdus: int = 20
    loss_pattern: List[int] = field(default_factory=lambda: [5])


@dataclass
class SyncSection:
    limits: SyncLimits
    drift_us_per_s: float = 40.0
    error_budget_us: float = 80.0
    duration_s: float = 3600.0
    step_s: float = 1.0


@dataclass
class MobilitySection:
    plane: ConstellationPlane
    eps_min_deg: float = 10.0
    ground_point_deg: float = 0.0
    horizon_s: Optional[float] = None
    hysteresis_dB: float = 3.0


@dataclass
class Scenario:
    name: str
    orbits: Dict[str, OrbitScenario] = field(default_factory=dict)
    active_orbit: Optional[str] = None
    budgets: Dict[str, LinkBudgetInput] = field(default_factory=dict)
    retx: Optional[RetxSection] = None
    timers: Optional[TimerSection] = None
    sync: Optional[SyncSection] = None
    mobility: Optional[MobilitySection] = None

    def require(self, section):
        value = getattr(self, section)
        if not value:
            raise ConfigError(f"scenario {self.name!r} has no {section!r} section")
        return value

    @property
    def orbit(self) -> OrbitScenario:
        orbits = self.require("orbits")
        if self.active_orbit is None:
            raise ConfigError(f"scenario {self.name!r} does not name an active 'orbit'")
        return orbits[self.active_orbit]

    def orbit_by_altitude(self, altitude_km) -> OrbitScenario:
        for o in self.require("orbits").values():
            if abs(o.altitude_km - altitude_km) < 1e-6:
                return o
        raise ConfigError(f"scenario {self.name!r} has no orbit at {altitude_km} km")

    def bler_curve(self):
        r = self.require("retx")
        cls = CURVE_FAMILIES[r.family]
        if r.snr50_dB is not None:
            return cls(r.snr50_dB, r.steepness)
        budgets = self.require("budgets")
        if r.calibration_budget not in budgets:
            raise ConfigError(f"retx.calibration_budget {r.calibration_budget!r} "
                              "is not a budget fixture")
        ref = snr(budgets[r.calibration_budget]).snr_dB
        ref += float(combining_gain_dB(r.calibration_repetitions))
        return cls.calibrated(ref, r.target_bler, r.steepness)

    def timer_rtt_ms(self) -> float:
        t = self.require("timers")
        if t.rtt_ms is not None:
            return t.rtt_ms
        orbits = self.require("orbits")
        if t.rtt_orbit not in orbits:
            raise ConfigError(f"timers.rtt_orbit {t.rtt_orbit!r} is not a defined orbit")
        o = orbits[t.rtt_orbit]
        return float(rtt_transparent(o, o.min_elevation_deg))


def _build(d) -> Scenario:
    if "name" not in d:
        raise ConfigError("scenario needs a 'name'")
    constants = PhysicalConstants.from_dict(d.get("constants"))
    orbits = {}
    for key, od in (d.get("orbits") or {}).items():
        od = dict(od)
        od.setdefault("constants", constants.to_dict())
        orbits[key] = OrbitScenario.from_dict(od)
    active = d.get("orbit")
    if active is not None and active not in orbits:
        raise ConfigError(f"active orbit {active!r} is not defined in 'orbits'")

    budgets = {}
    for key, bd in (d.get("budgets") or {}).items():
        try:
            budgets[key] = LinkBudgetInput.from_dict(bd)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"budget {key!r}: {exc}") from exc

    retx = None
    if d.get("retx") is not None:
        rd = dict(d["retx"])
        pols = [RetxPolicy.from_dict(p) for p in rd.pop("policies", [])]
        retx = RetxSection(policies=pols, **rd)

    timers = None
    if d.get("timers") is not None:
        td = dict(d["timers"])
        cfg = TimerConfig.from_dict(td.pop("config"))
        timers = TimerSection(config=cfg, **td)

    sync = None
    if d.get("sync") is not None:
        sd = dict(d["sync"])
        sync = SyncSection(limits=SyncLimits.from_dict(sd.pop("limits")), **sd)

    mobility = None
    if d.get("mobility") is not None:
        md = dict(d["mobility"])
        mobility = MobilitySection(plane=ConstellationPlane.from_dict(md.pop("plane")), **md)

    return Scenario(d["name"], orbits, active, budgets, retx, timers, sync, mobility)


def from_dict(d) -> Scenario:
    try:
        return _build(d)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


DEFAULT_SCENARIO = {
    "name": "default",
    "orbits": {
        "leo600": {"altitude_km": 600.0, "min_elevation_deg": 10.0},
        "leo1200": {"altitude_km": 1200.0, "min_elevation_deg": 10.0},
        "geo": {"altitude_km": 35786.0, "min_elevation_deg": 10.0},
    },
    "orbit": "leo600",
    "budgets": {k: v.to_dict() for k, v in TABLE2_FIXTURES.items()},
    "retx": {
        "family": "waterfall",
        "steepness": 3.0,
        "calibration_budget": "geo_dl",
        "calibration_repetitions": 4,
        "target_bler": 0.1,
        "policies": [p.to_dict() for p in figure_policies()["fig1"]],
    },
    "timers": {
        # ra window and contention timer values are test fixtures, not standard maxima
        "config": {"ra_response_window_ms": 10.0, "mac_contention_resolution_ms": 64.0,
                   "sr_prohibit_periods": 7, "sr_period_ms": 10.0, "t_reordering_ms": 200.0,
                   "rtt_offset_enabled": False},
        "rtt_orbit": "geo",
        "grant_issue_delay_ms": 0.0,
        "preamble_attempts_max": 1,
        "n_pdus": 20,
        "loss_pattern": [5],
    },
    "sync": {
        # 100 us CP is a fixture value
        "limits": {"prach_cp_us": 100.0, "prach_scs_Hz": 1250.0, "carrier_Hz": 2e9},
        "drift_us_per_s": 40.0,
        "error_budget_us": 80.0,
        "duration_s": 3600.0,
        "step_s": 1.0,
    },
    "mobility": {
        "plane": {"altitude_km": 750.0, "n_satellites": 70},
        "eps_min_deg": 10.0,
        "ground_point_deg": 0.0,
        "horizon_s": 7200.0,
        "hysteresis_dB": 3.0,
    },
}


def default_scenario() -> Scenario:
    return from_dict(copy.deepcopy(DEFAULT_SCENARIO))


def load(path) -> Scenario:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(d)
