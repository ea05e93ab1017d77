"""LEO coverage, service-link switch schedules and assistance-aided cell selection.

The switch schedule works in one orbital plane that contains the ground
point (an equatorial, prograde plane when Earth rotation is on), so every
satellite sweeps over the point at the same relative angular rate.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._io import write_csv
from .constants import DEFAULT_CONSTANTS, EARTH_ROTATION_RATE, PhysicalConstants
from .orbit import (OrbitScenario, angular_rate, central_angle,
                    elevation_from_central_angle, rtt_transparent)

SCHEDULE_CSV_HEADER = ("sat_id", "t_start_s", "t_stop_s")
_TWO_PI = 2.0 * math.pi


def _scenario(h_km, eps_min_deg, constants=DEFAULT_CONSTANTS):
    return OrbitScenario(h_km, eps_min_deg, constants=constants)


def coverage_geometry(h_km: float, eps_min_deg: float,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Footprint half-angle (deg) and great-circle diameter (km) above ``eps_min_deg``.

    ``eps_min_deg`` may be 90 here (zero-size footprint).
    """
    if not h_km > 0:
        raise ValueError("altitude must be positive")
    if not 0 <= eps_min_deg <= 90:
        raise ValueError("elevation must lie in [0, 90]")
    lam = central_angle(OrbitScenario(h_km, 0.0, constants=constants), eps_min_deg)
    lam = max(lam, 0.0)
    return {"central_angle_deg": math.degrees(lam), "diameter_km": 2.0 * constants.Re * lam}


def relative_rate(h_km, constants=DEFAULT_CONSTANTS, earth_rate=EARTH_ROTATION_RATE):
    """Angular rate (rad/s) of the satellite over a co-rotating ground point."""
    return angular_rate(_scenario(h_km, 0.0, constants)) - earth_rate


def visibility_window(h_km: float, eps_min_deg: float, earth_rate: float = EARTH_ROTATION_RATE,
                      constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Longest overhead pass above ``eps_min_deg``, in seconds."""
    lam = math.radians(coverage_geometry(h_km, eps_min_deg, constants)["central_angle_deg"])
    w = relative_rate(h_km, constants, earth_rate)
    if w <= 0:
        return math.inf
    return 2.0 * lam / w


@dataclass(frozen=True)
class ConstellationPlane:
    altitude_km: float
    n_satellites: int
    # phase of each satellite (deg) at t=0; evenly spaced when omitted
    phases_deg: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.n_satellites < 1:
            raise ValueError("n_satellites must be >= 1")
        if not self.altitude_km > 0:
            raise ValueError("altitude_km must be positive")
        if self.phases_deg is None:
            phases = tuple(360.0 * i / self.n_satellites for i in range(self.n_satellites))
            object.__setattr__(self, "phases_deg", phases)
        phases = tuple(float(p) for p in self.phases_deg)
        if len(phases) != self.n_satellites:
            raise ValueError("need one phase per satellite")
        wrapped = sorted(p % 360.0 for p in phases)
        gaps = np.diff(wrapped + [wrapped[0] + 360.0]) if len(wrapped) > 1 else [360.0]
        if min(gaps) <= 1e-9:
            raise ValueError("satellite phases must be distinct modulo 360 deg")
        object.__setattr__(self, "phases_deg", phases)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("phases_deg") is not None:
            d["phases_deg"] = tuple(d["phases_deg"])
        return cls(**d)

    def to_dict(self):
        return {"altitude_km": self.altitude_km, "n_satellites": self.n_satellites,
                "phases_deg": list(self.phases_deg)}


@dataclass(frozen=True)
class AssistanceInfo:
    serving_sat: int
    target_sat: int
    t_stop_serving_s: float
    t_start_serving_s: float
    ta_to_target_ms: float
    serving_elevation_deg: float
    target_elevation_deg: float


@dataclass
class SwitchSchedule:
    passes: List[Tuple[int, float, float]]  # (sat_id, t_start, t_stop), time-ordered
    serving: List[Tuple[int, float, float]]  # who serves when
    assistance: List[AssistanceInfo]
    gaps: List[Tuple[float, float]]

    @property
    def gap_free(self) -> bool:
        return not self.gaps

    def to_csv(self, path):
        return write_csv(path, SCHEDULE_CSV_HEADER, self.passes)


def _wrap(a):
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % _TWO_PI


def switch_schedule(plane: ConstellationPlane, eps_min_deg: float, ground_point_deg: float = 0.0,
                    horizon_s: Optional[float] = None, earth_rotation: bool = True,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> SwitchSchedule:
    """Serving intervals over a ground point and the assistance info at each switch.

    ``ground_point_deg`` is the point's in-plane angle. Each satellite serves
    from the moment it rises until it sets; the next satellite to rise takes
    over when the serving one sets. When nobody is visible in between, the
    interval is reported in ``gaps`` and no assistance entry is produced.
    """
    scen = _scenario(plane.altitude_km, eps_min_deg, constants)
    w = relative_rate(plane.altitude_km, constants, EARTH_ROTATION_RATE if earth_rotation else 0.0)
    if w <= 0:
        raise ValueError("satellites do not move relative to the ground point")
    lam = central_angle(scen, eps_min_deg)
    spacing = _TWO_PI / w / plane.n_satellites
    if horizon_s is None:
        horizon_s = 2.0 * max(spacing, 2.0 * lam / w)
    if horizon_s < spacing:
        raise ValueError("horizon must cover at least one inter-satellite interval")

    g = math.radians(ground_point_deg)
    period = _TWO_PI / w
    passes = []
    for sat_id, ph in enumerate(plane.phases_deg):
        # time the satellite is overhead, first occurrence may be before t=0
        t0 = _wrap(g - math.radians(ph)) / w
        k = math.floor((0.0 - (t0 + lam / w)) / period) + 1
        while True:
            tc = t0 + k * period
            start, stop = tc - lam / w, tc + lam / w
            if start > horizon_s:
                break
            if stop >= 0.0:
                passes.append((sat_id, max(start, 0.0), min(stop, horizon_s)))
            k += 1
    passes.sort(key=lambda p: (p[1], p[0]))

    def elevation(sat_id, t):
        ang = math.radians(plane.phases_deg[sat_id]) + w * t - g
        return float(elevation_from_central_angle(scen, _wrap(ang)))

    serving, assistance, gaps = [], [], []
    unused = list(passes)

    def take(p):
        unused.remove(p)
        return p

    covering = [p for p in unused if p[1] <= 0.0]
    if covering:
        current, t = take(max(covering, key=lambda p: (p[2], -p[0]))), 0.0
    else:
        current = take(unused[0])
        gaps.append((0.0, current[1]))
        t = current[1]
    while True:
        t_stop = current[2]
        serving.append((current[0], t, t_stop))
        if t_stop >= horizon_s:
            break
        handover = [p for p in unused if p[1] <= t_stop + 1e-9 and p[2] > t_stop]
        if handover:
            nxt = take(max(handover, key=lambda p: (p[2], -p[0])))
            tgt_el = float(min(max(elevation(nxt[0], t_stop), eps_min_deg), 90.0))
            assistance.append(AssistanceInfo(
                serving_sat=current[0], target_sat=nxt[0],
                t_stop_serving_s=t_stop, t_start_serving_s=nxt[1],
                ta_to_target_ms=float(rtt_transparent(scen, tgt_el)),
                serving_elevation_deg=float(max(elevation(current[0], t_stop), eps_min_deg)),
                target_elevation_deg=tgt_el,
            ))
            current, t = nxt, t_stop
            continue
        upcoming = [p for p in unused if p[1] > t_stop]
        if not upcoming:
            gaps.append((t_stop, horizon_s))
            break
        current = take(min(upcoming, key=lambda p: (p[1], p[0])))
        gaps.append((t_stop, current[1]))
        t = current[1]
    return SwitchSchedule(passes, serving, assistance, gaps)


def visible_at(plane: ConstellationPlane, eps_min_deg: float, t_s: float,
               ground_point_deg: float = 0.0, earth_rotation: bool = True,
               constants: PhysicalConstants = DEFAULT_CONSTANTS) -> List[int]:
    """Satellites at or above ``eps_min_deg`` at ``t_s`` (pointwise predicate)."""
    scen = _scenario(plane.altitude_km, eps_min_deg, constants)
    w = relative_rate(plane.altitude_km, constants, EARTH_ROTATION_RATE if earth_rotation else 0.0)
    g = math.radians(ground_point_deg)
    out = []
    for sat_id, ph in enumerate(plane.phases_deg):
        gamma = _wrap(math.radians(ph) + w * t_s - g)
        if elevation_from_central_angle(scen, gamma) >= eps_min_deg - 1e-9:
            out.append(sat_id)
    return out


@dataclass(frozen=True)
class CellCandidate:
    cell_id: str
    rsrp_dB: float
    assistance: Optional[AssistanceInfo] = None

    def __post_init__(self):
        if not math.isfinite(self.rsrp_dB):
            raise ValueError("rsrp_dB must be finite")

    def remaining_service_s(self, now_s: float) -> float:
        if self.assistance is None:
            return -math.inf
        return self.assistance.t_stop_serving_s - now_s


@dataclass(frozen=True)
class Selection:
    cell_id: str
    branch: str  # "rsrp" or "assistance"
    rsrp_gap_dB: float

    def to_record(self):
        return {"cell_id": self.cell_id, "branch": self.branch, "rsrp_gap_dB": self.rsrp_gap_dB}


_GAP_EPS = 1e-9


def select_cell_detailed(candidates: Sequence[CellCandidate], hysteresis_dB: float,
                         now_s: float = 0.0) -> Selection:
    if not candidates:
        raise ValueError("need at least one candidate")
    ranked = sorted(candidates, key=lambda c: (-c.rsrp_dB, c.cell_id))
    if len(ranked) == 1:
        return Selection(ranked[0].cell_id, "rsrp", math.inf)
    gap = ranked[0].rsrp_dB - ranked[1].rsrp_dB
    if gap >= hysteresis_dB - _GAP_EPS:
        return Selection(ranked[0].cell_id, "rsrp", gap)
    # near-equal signal: prefer the cell that keeps serving longest
    best = ranked[0].rsrp_dB
    close = [c for c in ranked if best - c.rsrp_dB < hysteresis_dB - _GAP_EPS]
    pick = min(close, key=lambda c: (-c.remaining_service_s(now_s), c.cell_id))
    return Selection(pick.cell_id, "assistance", gap)


def select_cell(candidates: Sequence[CellCandidate], hysteresis_dB: float, now_s: float = 0.0) -> str:
    """Cell to camp on: strongest RSRP unless the top two are within ``hysteresis_dB``,
    then the one with the longest remaining service time. Ties go to the lower cell id.
    """
    return select_cell_detailed(candidates, hysteresis_dB, now_s).cell_id
