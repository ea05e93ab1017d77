"""Uplink timing/frequency pre-compensation and TA maintenance.

Positions are Earth-fixed (ECEF) km, velocities km/s.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ._io import write_csv
from .constants import DEFAULT_CONSTANTS, PhysicalConstants

EPHEMERIS_VALIDITY_S = 30.0
TA_TRACE_CSV_HEADER = ("t_s", "error_us", "command_issued")


class StaleEphemerisError(ValueError):
    pass


@dataclass(frozen=True)
class EphemerisRecord:
    epoch_s: float
    position_km: tuple
    velocity_km_s: tuple

    def __post_init__(self):
        pos = np.asarray(self.position_km, dtype=float)
        vel = np.asarray(self.velocity_km_s, dtype=float)
        if pos.shape != (3,) or vel.shape != (3,):
            raise ValueError("position and velocity must be 3-vectors")
        if not np.all(np.isfinite(vel)):
            raise ValueError("velocity must be finite")
        if not np.linalg.norm(pos) > DEFAULT_CONSTANTS.Re:
            raise ValueError("satellite position must lie above the Earth surface")
        object.__setattr__(self, "position_km", tuple(pos.tolist()))
        object.__setattr__(self, "velocity_km_s", tuple(vel.tolist()))

    def state_at(self, t_s: float, validity_s: float = EPHEMERIS_VALIDITY_S):
        """Linearly propagated (position, velocity) at ``t_s``."""
        age = t_s - self.epoch_s
        if abs(age) > validity_s:
            raise StaleEphemerisError(
                f"ephemeris epoch {self.epoch_s} s is {abs(age):.1f} s from t={t_s} s "
                f"(validity {validity_s} s)")
        vel = np.asarray(self.velocity_km_s)
        return np.asarray(self.position_km) + vel * age, vel

    @classmethod
    def from_dict(cls, d):
        return cls(d["epoch_s"], tuple(d["position_km"]), tuple(d["velocity_km_s"]))

    def to_dict(self):
        return {"epoch_s": self.epoch_s, "position_km": list(self.position_km),
                "velocity_km_s": list(self.velocity_km_s)}


@dataclass(frozen=True)
class UEState:
    position_km: tuple
    gnss_position_error_m: float = 0.0
    local_clock_error_ppm: float = 0.0
    airborne: bool = False

    def __post_init__(self):
        pos = np.asarray(self.position_km, dtype=float)
        if pos.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if not self.airborne and abs(np.linalg.norm(pos) - DEFAULT_CONSTANTS.Re) > 10.0:
            raise ValueError("ground UE must be within 10 km of the Earth surface")
        object.__setattr__(self, "position_km", tuple(pos.tolist()))


@dataclass(frozen=True)
class SyncLimits:
    prach_cp_us: float
    prach_scs_Hz: float = 1250.0
    carrier_Hz: float = 2e9

    def __post_init__(self):
        if not (self.prach_cp_us > 0 and self.prach_scs_Hz > 0 and self.carrier_Hz > 0):
            raise ValueError("sync limits must be positive")

    @property
    def max_cfo_Hz(self) -> float:
        return self.prach_scs_Hz / 2.0

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {"prach_cp_us": self.prach_cp_us, "prach_scs_Hz": self.prach_scs_Hz,
                "carrier_Hz": self.carrier_Hz}


@dataclass(frozen=True)
class Precompensation:
    ta_ms: float
    freq_offset_Hz: float
    service_distance_km: float
    closing_speed_km_s: float


def precompensation(ue: UEState, eph: EphemerisRecord, limits: SyncLimits,
                    common_feeder_delay_ms: float = 0.0, t_s: Optional[float] = None,
                    validity_s: float = EPHEMERIS_VALIDITY_S,
                    constants: PhysicalConstants = DEFAULT_CONSTANTS) -> Precompensation:
    """UE-side timing advance and carrier offset for a PRACH sent at ``t_s``.

    ``ta_ms`` is the service-link round trip plus the broadcast common
    (feeder) delay. ``freq_offset_Hz`` is ``-(closing speed / c) * f``: adding
    it to the transmit carrier cancels the service-link Doppler seen at the
    satellite.
    """
    t_s = eph.epoch_s if t_s is None else t_s
    sat, vel = eph.state_at(t_s, validity_s)
    los = sat - np.asarray(ue.position_km)
    d = float(np.linalg.norm(los))
    closing = -float(np.dot(los, vel)) / d
    c = constants.c_km_s
    return Precompensation(
        ta_ms=2.0 * d / c * 1e3 + common_feeder_delay_ms,
        freq_offset_Hz=-(closing / c) * limits.carrier_Hz,
        service_distance_km=d,
        closing_speed_km_s=closing,
    )


@dataclass(frozen=True)
class ResidualVerdict:
    ok: bool
    timing_ok: bool
    cfo_ok: bool

    @property
    def failed_limits(self) -> List[str]:
        out = []
        if not self.timing_ok:
            out.append("timing")
        if not self.cfo_ok:
            out.append("cfo")
        return out

    def __bool__(self):
        return self.ok


def validate_residuals(timing_residual_us: float, cfo_residual_Hz: float,
                       limits: SyncLimits) -> ResidualVerdict:
    """Both limits are strict: residual timing below the CP, CFO below half the SCS."""
    timing_ok = abs(timing_residual_us) < limits.prach_cp_us
    cfo_ok = abs(cfo_residual_Hz) < limits.max_cfo_Hz
    return ResidualVerdict(timing_ok and cfo_ok, timing_ok, cfo_ok)


def pass_residuals(pass_result, limits: SyncLimits, gnss_error_m: float = 0.0):
    """Worst residual timing (us) and frequency (Hz) over a propagated pass.

    At every sample the UE pre-compensates from an ephemeris taken from the
    pass itself and the result is compared with the true RTT and Doppler.
    ``gnss_error_m`` displaces the UE position estimate radially.
    """
    p = pass_result
    true_ue = np.asarray(p.ue_pos, dtype=float)
    est = true_ue * (1.0 + gnss_error_m * 1e-3 / np.linalg.norm(true_ue))
    ue = UEState(tuple(est), gnss_position_error_m=gnss_error_m)
    worst_t = worst_f = 0.0
    for i in range(len(p)):
        eph = EphemerisRecord(float(p.t[i]), tuple(p.sat_pos[i]), tuple(p.sat_vel[i]))
        feeder = p.rtt_ms[i] / 2.0  # feeder leg equals service leg
        pc = precompensation(ue, eph, limits, feeder, constants=p.scenario.constants)
        worst_t = max(worst_t, abs(pc.ta_ms - p.rtt_ms[i]) * 1e3)
        doppler_hz = p.doppler_ppm[i] * 1e-6 * limits.carrier_Hz
        worst_f = max(worst_f, abs(doppler_hz + pc.freq_offset_Hz))
    return float(worst_t), float(worst_f)


def gnss_timing_error_us(position_error_m: float, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Worst-case round-trip timing error from a line-of-sight position error."""
    return 2.0 * position_error_m / constants.c * 1e6


@dataclass
class TaMaintenanceResult:
    commands_sent: int
    max_error_us: float
    trace: List[tuple] = field(default_factory=list)

    def to_csv(self, path):
        return write_csv(path, TA_TRACE_CSV_HEADER, self.trace)


def ta_maintenance_sim(drift_us_per_s: float, error_budget_us: float, duration_s: float,
                       mode: str = "network_commands", sample_s: float = 1.0,
                       autonomous_update_s: float = 1.0) -> TaMaintenanceResult:
    """Track the uplink timing error over a connection of ``duration_s``.

    ``network_commands``: the network sends a TA command at the start of
    every interval in which the drift would push the error past the budget.
    The initial alignment counts as the first command, so a session needs
    ``ceil(duration * drift / budget)`` commands.

    ``autonomous``: the UE re-derives its TA from GNSS and ephemeris every
    ``autonomous_update_s`` and no commands are sent.
    """
    if not (error_budget_us > 0 and duration_s > 0 and sample_s > 0):
        raise ValueError("budget, duration and sample step must be positive")
    if mode not in ("network_commands", "autonomous"):
        raise ValueError(f"unknown mode {mode!r}")
    drift = abs(drift_us_per_s)

    if mode == "autonomous":
        if not autonomous_update_s > 0:
            raise ValueError("autonomous_update_s must be positive")
        period = autonomous_update_s
        commands = []
    elif drift == 0:
        period = math.inf
        commands = []
    else:
        period = error_budget_us / drift
        n = math.ceil(round(duration_s / period, 9))
        commands = [k * period for k in range(n)]

    # event loop: command instants interleaved with the sampling grid
    events = sorted({*np.arange(0.0, duration_s + 1e-9, sample_s).tolist(), *commands})
    cmd_set = set(commands)
    trace = []
    last_fix = 0.0
    max_err = 0.0
    for t in events:
        if mode == "autonomous" and math.isfinite(period):
            last_fix = math.floor(round(t / period, 9)) * period
        err = drift * (t - last_fix)
        max_err = max(max_err, err)
        issued = t in cmd_set
        if issued:
            last_fix = t
            err = 0.0
        trace.append((float(t), float(err), issued))
    # error peaks just before each fix
    if drift and math.isfinite(period):
        max_err = max(max_err, min(drift * period, drift * duration_s))
    return TaMaintenanceResult(len(commands), float(max_err), trace)
