"""Discrete-event runs of the RTT-sensitive MAC/RLC timers.

Every message takes exactly ``rtt/2`` per direction. Times are ms.
"""

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

from ._io import write_csv

TRACE_CSV_HEADER = ("t_ms", "actor", "event")

# Which NTN fix applies to which timer: extend its value range, or delay its start by the RTT.
NTN_ADAPTATION = {
    "ra_response_window": "offset",
    "mac_contention_resolution": "offset",
    "sr_prohibit": "extend",
    "t_reordering": "extend",
}

LEGACY_MAX_SR_PROHIBIT_PERIODS = 7
LEGACY_T_REORDERING_MS = (200.0, 1600.0)  # second-largest, largest


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    TIMER_EXPIRY = "timer_expiry"
    MAX_ATTEMPTS = "max_attempts"


@dataclass(frozen=True)
class TimerConfig:
    ra_response_window_ms: float
    mac_contention_resolution_ms: float
    sr_prohibit_periods: int
    sr_period_ms: float
    t_reordering_ms: float
    rtt_offset_enabled: bool = False

    def __post_init__(self):
        for name in ("ra_response_window_ms", "mac_contention_resolution_ms",
                     "sr_period_ms", "t_reordering_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sr_prohibit_periods < 1:
            raise ValueError("sr_prohibit_periods must be >= 1")

    @property
    def sr_prohibit_ms(self) -> float:
        return self.sr_prohibit_periods * self.sr_period_ms

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def adapt_for_ntn(cfg: TimerConfig, rtt_ms: float, grant_issue_delay_ms: float = 0.0) -> TimerConfig:
    """Apply the per-timer NTN fix: offset the RA timers, extend the other two."""
    periods = max(cfg.sr_prohibit_periods,
                  math.ceil(round((rtt_ms + grant_issue_delay_ms) / cfg.sr_period_ms, 9)))
    reordering = cfg.t_reordering_ms
    if reordering <= rtt_ms:
        reordering = math.nextafter(rtt_ms, math.inf)
    return replace(cfg, rtt_offset_enabled=True, sr_prohibit_periods=periods,
                   t_reordering_ms=reordering)


@dataclass(frozen=True)
class DrxConfig:
    """Periodic on-durations gating downlink reception."""

    cycle_ms: float
    on_duration_ms: float
    offset_ms: float = 0.0

    def __post_init__(self):
        if not (self.cycle_ms > 0 and 0 < self.on_duration_ms <= self.cycle_ms):
            raise ValueError("need 0 < on_duration_ms <= cycle_ms")

    def awake(self, t_ms: float) -> bool:
        return ((t_ms - self.offset_ms) % self.cycle_ms) < self.on_duration_ms


@dataclass
class EventTrace:
    events: List[Tuple[float, str, str]] = field(default_factory=list)
    outcome: Optional[Outcome] = None

    def log(self, t, actor, event):
        if self.events and t < self.events[-1][0]:
            raise RuntimeError("event timestamps must not decrease")
        self.events.append((float(t), actor, event))

    def names(self):
        return [e[2] for e in self.events]

    def to_csv(self, path):
        return write_csv(path, TRACE_CSV_HEADER, self.events)


class _Queue:
    """Minimal event queue; ties resolve by priority then insertion order."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()
        self._cancelled = set()

    def push(self, t, kind, payload=None, priority=1):
        key = next(self._seq)
        heapq.heappush(self._heap, (t, priority, key, kind, payload))
        return key

    def cancel(self, key):
        self._cancelled.add(key)

    def pop(self):
        while self._heap:
            t, _, key, kind, payload = heapq.heappop(self._heap)
            if key not in self._cancelled:
                return t, kind, payload
        return None

    def __bool__(self):
        return any(item[2] not in self._cancelled for item in self._heap)


def run_random_access(cfg: TimerConfig, rtt_ms: float, preamble_attempts_max: int = 1,
                      drx: Optional[DrxConfig] = None) -> EventTrace:
    """Preamble -> RAR window -> Msg3 -> contention resolution.

    The RAR reaches the UE ``rtt_ms`` after the preamble and Msg4 ``rtt_ms``
    after Msg3. With ``rtt_offset_enabled`` both monitoring timers start one
    RTT late. A message is received only inside the running window (and,
    with ``drx``, inside an on-duration).
    """
    if rtt_ms < 0:
        raise ValueError("rtt_ms must be >= 0")
    if preamble_attempts_max < 1:
        raise ValueError("preamble_attempts_max must be >= 1")
    offset = rtt_ms if cfg.rtt_offset_enabled else 0.0
    trace = EventTrace()
    q = _Queue()
    q.push(0.0, "send_preamble", 1)
    window = None  # (name, start, end, expiry key)
    pending = {}

    def can_receive(t, timer_name):
        if window is None or window[0] != timer_name or not window[1] <= t <= window[2]:
            return False
        return drx is None or drx.awake(t)

    while q:
        t, kind, payload = q.pop()
        if kind == "send_preamble":
            trace.log(t, "ue", f"preamble_tx attempt={payload}")
            pending["attempt"] = payload
            q.push(t + rtt_ms, "rar_arrival", payload)
            q.push(t + offset, "start_timer", ("ra_response_window", cfg.ra_response_window_ms),
                   priority=0)
        elif kind == "start_timer":
            name, length = payload
            trace.log(t, "ue", f"{name}_start")
            key = q.push(t + length, "timer_expiry", name, priority=2)
            window = (name, t, t + length, key)
        elif kind == "rar_arrival":
            if can_receive(t, "ra_response_window") and payload == pending["attempt"]:
                trace.log(t, "ue", "rar_rx")
                q.cancel(window[3])
                trace.log(t, "ue", "ra_response_window_stop")
                window = None
                trace.log(t, "ue", "msg3_tx")
                q.push(t + rtt_ms, "msg4_arrival")
                q.push(t + offset, "start_timer",
                       ("mac_contention_resolution", cfg.mac_contention_resolution_ms),
                       priority=0)
            else:
                trace.log(t, "ue", "rar_missed")
        elif kind == "msg4_arrival":
            if can_receive(t, "mac_contention_resolution"):
                trace.log(t, "ue", "msg4_rx")
                q.cancel(window[3])
                trace.log(t, "ue", "mac_contention_resolution_stop")
                window = None
                trace.outcome = Outcome.SUCCESS
            else:
                trace.log(t, "ue", "msg4_missed")
        elif kind == "timer_expiry":
            trace.log(t, "ue", f"{payload}_expiry")
            window = None
            attempt = pending["attempt"]
            if attempt < preamble_attempts_max:
                q.push(t, "send_preamble", attempt + 1)
            else:
                trace.outcome = (Outcome.TIMER_EXPIRY if preamble_attempts_max == 1
                                 else Outcome.MAX_ATTEMPTS)
        if trace.outcome is not None:
            break
    return trace


@dataclass
class SrResult:
    sr_transmissions: int
    duplicate_srs: int
    grant_arrival_ms: float
    trace: EventTrace


def run_sr_sequence(cfg: TimerConfig, rtt_ms: float, grant_issue_delay_ms: float = 0.0) -> SrResult:
    """Scheduling requests repeated on every sr-ProhibitTimer expiry until the grant lands."""
    if rtt_ms < 0 or grant_issue_delay_ms < 0:
        raise ValueError("rtt and grant delay must be >= 0")
    trace = EventTrace()
    q = _Queue()
    grant_at = rtt_ms + grant_issue_delay_ms
    # the first SR always precedes its own grant, even at zero RTT
    q.push(0.0, "send_sr", priority=-1)
    q.push(grant_at, "grant", priority=0)
    sent = 0
    prohibit_key = None
    while q:
        t, kind, _ = q.pop()
        if kind == "send_sr":
            sent += 1
            trace.log(t, "ue", "sr_tx" if sent == 1 else "sr_tx_duplicate")
            trace.log(t, "ue", "sr_prohibit_start")
            prohibit_key = q.push(t + cfg.sr_prohibit_ms, "prohibit_expiry", priority=2)
        elif kind == "prohibit_expiry":
            trace.log(t, "ue", "sr_prohibit_expiry")
            # next SR opportunity at or after expiry
            nxt = math.ceil(round(t / cfg.sr_period_ms, 9)) * cfg.sr_period_ms
            q.push(nxt, "send_sr")
        elif kind == "grant":
            trace.log(t, "ue", "ul_grant_rx")
            if prohibit_key is not None:
                q.cancel(prohibit_key)
                trace.log(t, "ue", "sr_prohibit_stop")
            trace.outcome = Outcome.SUCCESS
            break
    return SrResult(sent, sent - 1, grant_at, trace)


@dataclass
class ReorderingResult:
    spurious_status_reports: int
    recovered: bool
    trace: EventTrace


def run_rlc_reordering(cfg: TimerConfig, rtt_ms: float, loss_pattern: Iterable[int],
                       n_pdus: int, pdu_interval_ms: float = 1.0) -> ReorderingResult:
    """RLC receiver with t-Reordering under MAC-layer PDU losses.

    PDU ``sn`` arrives at ``sn * pdu_interval_ms`` unless lost. A lost PDU's
    retransmission is already under way and lands one RTT after the gap is
    detected, so every t-Reordering expiry that fires first yields a
    spurious status report. Expiry wins ties with an arrival.
    """
    if n_pdus < 2:
        raise ValueError("n_pdus must be >= 2")
    lost = set(loss_pattern)
    if any(not 0 <= sn < n_pdus for sn in lost):
        raise ValueError("loss_pattern entries must be valid sequence numbers")
    trace = EventTrace()
    q = _Queue()
    for sn in range(n_pdus):
        if sn not in lost:
            q.push(sn * pdu_interval_ms, "rx", (sn, False))

    received = set()
    retx_scheduled = set()
    # receive state variables: VR(MS), VR(H), VR(X)
    vr = {"ms": 0, "h": 0, "x": None}
    timer = None
    spurious = 0

    def first_missing_from(sn):
        while sn in received:
            sn += 1
        return sn

    def start_timer(t):
        vr["x"] = vr["h"]
        trace.log(t, "rx", f"t_reordering_start vr_x={vr['x']}")
        return q.push(t + cfg.t_reordering_ms, "t_reordering_expiry", priority=0)

    while q:
        t, kind, payload = q.pop()
        if kind == "rx":
            sn, is_retx = payload
            received.add(sn)
            trace.log(t, "rx", f"pdu_rx sn={sn}{' retx' if is_retx else ''}")
            vr["h"] = max(vr["h"], sn + 1)
            for missing in range(sn):
                if missing in lost and missing not in received and missing not in retx_scheduled:
                    retx_scheduled.add(missing)
                    q.push(t + rtt_ms, "rx", (missing, True))
                    trace.log(t, "rx", f"gap_detected sn={missing}")
            if sn == vr["ms"]:
                vr["ms"] = first_missing_from(sn)
            if timer is not None and vr["x"] <= vr["ms"]:
                q.cancel(timer)
                timer = None
                trace.log(t, "rx", "t_reordering_stop")
            if timer is None and vr["h"] > vr["ms"]:
                timer = start_timer(t)
        elif kind == "t_reordering_expiry":
            timer = None
            trace.log(t, "rx", "t_reordering_expiry")
            nack = [sn for sn in range(vr["x"]) if sn not in received]
            trace.log(t, "rx", "status_report nack=" + ";".join(map(str, nack)))
            # the NACKed PDUs are already being retransmitted
            spurious += 1
            vr["ms"] = first_missing_from(vr["x"])
            if vr["h"] > vr["ms"]:
                timer = start_timer(t)
    recovered = len(received) == n_pdus
    trace.outcome = Outcome.SUCCESS if recovered else Outcome.TIMER_EXPIRY
    return ReorderingResult(spurious, recovered, trace)
