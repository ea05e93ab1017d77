"""Circular-orbit geometry: slant range, transparent-payload delay, Doppler.

All angles are degrees at the API boundary. Distances are km, delays ms,
Doppler in parts-per-million of the carrier (positive while approaching).
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._io import write_csv
from .constants import DEFAULT_CONSTANTS, EARTH_ROTATION_RATE, PhysicalConstants

PASS_CSV_HEADER = ("t_s", "elevation_deg", "slant_range_km", "one_way_delay_ms",
                   "rtt_ms", "doppler_ppm")

MIN_PASS_SAMPLES = 10


@dataclass(frozen=True)
class OrbitScenario:
    altitude_km: float
    min_elevation_deg: float = 10.0
    feeder_equals_service: bool = True
    # used only when feeder_equals_service is False
    feeder_distance_km: Optional[float] = None
    constants: PhysicalConstants = field(default_factory=lambda: DEFAULT_CONSTANTS)

    def __post_init__(self):
        if not self.altitude_km > 0:
            raise ValueError(f"altitude_km must be positive, got {self.altitude_km!r}")
        if not 0 <= self.min_elevation_deg < 90:
            raise ValueError("min_elevation_deg must be in [0, 90)")
        if not self.feeder_equals_service:
            if self.feeder_distance_km is None or not self.feeder_distance_km > 0:
                raise ValueError("feeder_distance_km is required when "
                                 "feeder_equals_service is false")

    @property
    def orbit_radius_km(self) -> float:
        return self.constants.Re + self.altitude_km

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["constants"] = PhysicalConstants.from_dict(d.get("constants"))
        return cls(**d)

    def to_dict(self):
        return {
            "altitude_km": self.altitude_km,
            "min_elevation_deg": self.min_elevation_deg,
            "feeder_equals_service": self.feeder_equals_service,
            "feeder_distance_km": self.feeder_distance_km,
            "constants": self.constants.to_dict(),
        }


@dataclass(frozen=True)
class PassSample:
    t: float
    elevation_deg: float
    slant_range_km: float
    one_way_delay_ms: float
    doppler_ppm: float
    rtt_ms: float


def _check_elevation(elevation_deg):
    e = np.asarray(elevation_deg, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < 0) or np.any(e > 90):
        raise ValueError(f"elevation must lie in [0, 90] degrees, got {elevation_deg!r}")
    return e


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def slant_range(scenario: OrbitScenario, elevation_deg):
    """Distance (km) from a ground point to the satellite seen at ``elevation_deg``."""
    e = np.radians(_check_elevation(elevation_deg))
    Re = scenario.constants.Re
    r = scenario.orbit_radius_km
    d = np.sqrt(r**2 - (Re * np.cos(e))**2) - Re * np.sin(e)
    return _scalar(d)


def _feeder_km(scenario, service_km):
    if scenario.feeder_equals_service:
        return service_km
    return scenario.feeder_distance_km


def one_way_delay(scenario: OrbitScenario, elevation_deg):
    """UE to base station delay through a transparent payload, in ms."""
    d = np.asarray(slant_range(scenario, elevation_deg))
    total = d + _feeder_km(scenario, d)
    return _scalar(total / scenario.constants.c_km_s * 1e3)


def rtt_transparent(scenario: OrbitScenario, elevation_deg):
    """Round-trip time (ms) over service and feeder links."""
    return _scalar(2.0 * np.asarray(one_way_delay(scenario, elevation_deg)))


def orbital_velocity(scenario: OrbitScenario) -> float:
    """Circular orbital speed in km/s."""
    return math.sqrt(scenario.constants.mu / scenario.orbit_radius_km)


def orbital_period(scenario: OrbitScenario) -> float:
    """Circular orbital period in minutes."""
    r = scenario.orbit_radius_km
    return 2.0 * math.pi * math.sqrt(r**3 / scenario.constants.mu) / 60.0


def angular_rate(scenario: OrbitScenario) -> float:
    return orbital_velocity(scenario) / scenario.orbit_radius_km


def is_geostationary(scenario: OrbitScenario, rtol: float = 1e-3) -> bool:
    """True when the orbit co-rotates with the Earth (equatorial GEO)."""
    return abs(angular_rate(scenario) - EARTH_ROTATION_RATE) <= rtol * EARTH_ROTATION_RATE


def max_doppler_ppm(scenario: OrbitScenario) -> float:
    """Worst-case service-link Doppler, horizon geometry with counter-rotating ground.

    An ideal geostationary satellite is at rest relative to the ground and
    gets 0.
    """
    if is_geostationary(scenario):
        return 0.0
    k = scenario.constants
    v = orbital_velocity(scenario)
    return (v + k.v_eq) / k.c_km_s * (k.Re / scenario.orbit_radius_km) * 1e6


def central_angle(scenario: OrbitScenario, elevation_deg) -> float:
    """Earth central angle (rad) between sub-satellite point and observer."""
    e = np.radians(_check_elevation(elevation_deg))
    ratio = scenario.constants.Re / scenario.orbit_radius_km
    return _scalar(np.arccos(ratio * np.cos(e)) - e)


def elevation_from_central_angle(scenario: OrbitScenario, gamma_rad):
    """Elevation (deg) of a satellite at Earth central angle ``gamma_rad``."""
    ratio = scenario.constants.Re / scenario.orbit_radius_km
    g = np.asarray(gamma_rad, dtype=float)
    return _scalar(np.degrees(np.arctan2(np.cos(g) - ratio, np.sin(np.abs(g)))))


@dataclass
class PassResult:
    """One propagated pass. Arrays are aligned sample-by-sample.

    ``sat_pos``/``sat_vel`` are Earth-fixed (km, km/s); ``ue_pos`` is the
    Earth-fixed observer position.
    """

    scenario: OrbitScenario
    t: np.ndarray
    elevation_deg: np.ndarray
    slant_range_km: np.ndarray
    one_way_delay_ms: np.ndarray
    rtt_ms: np.ndarray
    doppler_ppm: np.ndarray
    sat_pos: np.ndarray
    sat_vel: np.ndarray
    ue_pos: np.ndarray
    step_s: float
    zenith_index: int

    def __len__(self):
        return len(self.t)

    @property
    def samples(self) -> List[PassSample]:
        return [
            PassSample(float(t), float(e), float(d), float(o), float(f), float(r))
            for t, e, d, o, f, r in zip(self.t, self.elevation_deg, self.slant_range_km,
                                        self.one_way_delay_ms, self.doppler_ppm, self.rtt_ms)
        ]

    @property
    def doppler_rate_ppm_s(self) -> np.ndarray:
        return np.gradient(self.doppler_ppm, self.step_s)

    @property
    def max_doppler_rate_ppm_s(self) -> float:
        return float(np.max(np.abs(self.doppler_rate_ppm_s)))

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0])

    def rows(self):
        return zip(self.t.tolist(), self.elevation_deg.tolist(), self.slant_range_km.tolist(),
                   self.one_way_delay_ms.tolist(), self.rtt_ms.tolist(),
                   self.doppler_ppm.tolist())

    def to_csv(self, path):
        return write_csv(path, PASS_CSV_HEADER, self.rows())


def _rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    z, o = np.zeros_like(angle), np.ones_like(angle)
    return np.stack([np.stack([c, -s, z], -1),
                     np.stack([s, c, z], -1),
                     np.stack([z, z, o], -1)], -2)


def propagate_pass(scenario: OrbitScenario, ue_at_ground_track: bool = True,
                   step_s: float = 1.0, *, rotating_earth: bool = False,
                   max_elevation_deg: float = 45.0) -> PassResult:
    """Propagate one pass of a circular equatorial orbit over a ground point.

    With ``ue_at_ground_track`` the pass goes through zenith; otherwise the
    observer is displaced across the track so the pass peaks at
    ``max_elevation_deg``. ``rotating_earth`` lets the observer co-rotate
    with the Earth (prograde orbit).

    Samples are placed symmetrically around closest approach so that the
    zenith instant is always a sample. ``t`` counts from the instant the
    satellite rises above the scenario's minimum elevation.
    """
    if not step_s > 0:
        raise ValueError("step_s must be positive")
    k = scenario.constants
    r = scenario.orbit_radius_km
    w_sat = angular_rate(scenario)
    w_earth = EARTH_ROTATION_RATE if rotating_earth else 0.0
    w_rel = w_sat - w_earth
    if w_rel <= 0 or (rotating_earth and is_geostationary(scenario)):
        raise ValueError("satellite is not moving relative to the ground; no pass")

    if ue_at_ground_track:
        beta = 0.0
    else:
        if not scenario.min_elevation_deg < max_elevation_deg <= 90:
            raise ValueError("max_elevation_deg must exceed the minimum elevation")
        beta = central_angle(scenario, max_elevation_deg)
    lam = central_angle(scenario, scenario.min_elevation_deg)
    half = math.acos(min(1.0, math.cos(lam) / math.cos(beta))) / w_rel

    n_half = int(math.floor(half / step_s + 1e-9))
    if 2 * n_half + 1 < MIN_PASS_SAMPLES:
        raise ValueError(
            f"step_s={step_s} gives {2 * n_half + 1} samples over a {2 * half:.1f} s pass; "
            f"need at least {MIN_PASS_SAMPLES}")
    t_rel = np.arange(-n_half, n_half + 1) * step_s

    # inertial frame, z = Earth axis, x through the observer at closest approach
    a_sat = w_sat * t_rel
    sat = r * np.stack([np.cos(a_sat), np.sin(a_sat), np.zeros_like(a_sat)], -1)
    sat_v = r * w_sat * np.stack([-np.sin(a_sat), np.cos(a_sat), np.zeros_like(a_sat)], -1)
    a_ue = w_earth * t_rel
    ue = k.Re * np.stack([math.cos(beta) * np.cos(a_ue), math.cos(beta) * np.sin(a_ue),
                          np.full_like(a_ue, math.sin(beta))], -1)
    ue_v = k.Re * w_earth * math.cos(beta) * np.stack(
        [-np.sin(a_ue), np.cos(a_ue), np.zeros_like(a_ue)], -1)

    los = sat - ue
    d = np.linalg.norm(los, axis=-1)
    up = ue / np.linalg.norm(ue, axis=-1, keepdims=True)
    elev = np.degrees(np.arcsin(np.clip(np.sum(los * up, -1) / d, -1.0, 1.0)))
    range_rate = np.sum(los * (sat_v - ue_v), -1) / d
    doppler_ppm = -range_rate / k.c_km_s * 1e6

    one_way = (d + _feeder_km(scenario, d)) / k.c_km_s * 1e3

    # Earth-fixed frame for ephemeris consumers
    rot = _rot_z(-a_ue)
    omega = np.array([0.0, 0.0, w_earth])
    sat_ecef = np.einsum("nij,nj->ni", rot, sat)
    sat_v_ecef = np.einsum("nij,nj->ni", rot, sat_v - np.cross(omega, sat))
    ue_ecef = np.einsum("nij,nj->ni", rot, ue)

    return PassResult(
        scenario=scenario,
        t=t_rel + half,
        elevation_deg=elev,
        slant_range_km=d,
        one_way_delay_ms=one_way,
        rtt_ms=2.0 * one_way,
        doppler_ppm=doppler_ppm,
        sat_pos=sat_ecef,
        sat_vel=sat_v_ecef,
        ue_pos=ue_ecef[0],
        step_s=float(step_s),
        zenith_index=n_half,
    )
