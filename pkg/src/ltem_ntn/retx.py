"""HARQ combining vs plain ARQ vs blind repetitions with RLC ARQ.

Decoding follows a parametric SNR -> BLER curve. Combining ``m`` copies is
modelled as chase combining in AWGN: the effective SNR grows by
``10*log10(m)``.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit

from ._io import write_csv
from .constants import SUBFRAME_MS

REPETITION_SET = tuple(2**i for i in range(12))  # 1 .. 2048
CURVE_CSV_HEADER = ("snr_db", "policy", "n", "residual_bler", "expected_subframes", "flag")

MC_CHUNK = 1 << 16


class NonConvergenceError(RuntimeError):
    """Truncated retransmission loop still fails more often than not."""


@dataclass(frozen=True)
class BlerCurve:
    """Logistic BLER in the dB domain, ``slope`` in 1/dB.

    Its tail falls only exponentially in dB, so above roughly
    ``snr50 + 3 dB`` two independent ARQ attempts beat 3 dB of combining
    gain. Use :class:`WaterfallCurve` where combining must dominate.
    """

    snr50_dB: float
    slope: float = 1.0

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError("slope must be positive")

    @classmethod
    def calibrated(cls, ref_snr_dB: float, target_bler: float = 0.1, slope: float = 1.0):
        """Curve whose single-shot BLER equals ``target_bler`` at ``ref_snr_dB``."""
        _check_target(target_bler)
        return cls(ref_snr_dB - math.log(1.0 / target_bler - 1.0) / slope, slope)

    def evaluate(self, snr_dB):
        return expit(-self.slope * (np.asarray(snr_dB, dtype=float) - self.snr50_dB))

    def __call__(self, snr_dB):
        return bler(self, snr_dB)


@dataclass(frozen=True)
class WaterfallCurve:
    """BLER = 2**-(snr/snr50)**order with SNRs in linear units.

    ``-log(BLER)`` grows as a power ``order >= 1`` of linear SNR, so
    combining ``n`` copies always does at least as well as ``n``
    independent attempts.
    """

    snr50_dB: float
    order: float = 3.0

    def __post_init__(self):
        if not self.order >= 1.0:
            raise ValueError("order must be >= 1")

    @classmethod
    def calibrated(cls, ref_snr_dB: float, target_bler: float = 0.1, order: float = 3.0):
        _check_target(target_bler)
        return cls(ref_snr_dB - 10.0 / order * math.log10(-math.log2(target_bler)), order)

    def evaluate(self, snr_dB):
        x = np.power(10.0, self.order * (np.asarray(snr_dB, dtype=float) - self.snr50_dB) / 10.0)
        return np.exp2(-x)

    def __call__(self, snr_dB):
        return bler(self, snr_dB)


def _check_target(target_bler):
    if not 0 < target_bler < 1:
        raise ValueError("target_bler must be in (0, 1)")


def bler(curve, snr_dB):
    """Single-transmission block error probability at ``snr_dB``."""
    out = curve.evaluate(snr_dB)
    return float(out) if np.ndim(out) == 0 else out


def combining_gain_dB(n):
    return 10.0 * np.log10(n)


class RetxKind(str, enum.Enum):
    HARQ_COMBINING = "harq"
    PLAIN_ARQ = "arq"
    BLIND_PLUS_ARQ = "blind_arq"


@dataclass(frozen=True)
class RetxPolicy:
    kind: RetxKind
    max_transmissions: int = 4
    n_blind: int = 1
    max_rlc_rounds: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", RetxKind(self.kind))
        if self.max_transmissions < 1 or self.n_blind < 1 or self.max_rlc_rounds < 1:
            raise ValueError("transmission counts must be >= 1")
        if self.kind is RetxKind.BLIND_PLUS_ARQ and self.n_blind not in REPETITION_SET:
            raise ValueError(f"n_blind must be one of {REPETITION_SET}")

    @classmethod
    def harq(cls, max_transmissions=4):
        return cls(RetxKind.HARQ_COMBINING, max_transmissions=max_transmissions)

    @classmethod
    def arq(cls, max_transmissions=4):
        return cls(RetxKind.PLAIN_ARQ, max_transmissions=max_transmissions)

    @classmethod
    def blind(cls, n_blind=4, max_rlc_rounds=4):
        return cls(RetxKind.BLIND_PLUS_ARQ, n_blind=n_blind, max_rlc_rounds=max_rlc_rounds)

    @property
    def max_subframes(self) -> int:
        if self.kind is RetxKind.BLIND_PLUS_ARQ:
            return self.n_blind * self.max_rlc_rounds
        return self.max_transmissions

    @property
    def label(self) -> str:
        if self.kind is RetxKind.BLIND_PLUS_ARQ:
            return f"blind{self.n_blind}_arq"
        return self.kind.value

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return {"kind": self.kind.value, "max_transmissions": self.max_transmissions,
                "n_blind": self.n_blind, "max_rlc_rounds": self.max_rlc_rounds}


def residual_bler(policy: RetxPolicy, curve, snr_dB: float,
                  n: Optional[int] = None) -> float:
    """Probability the block is still not decoded after ``n`` subframes.

    ``n`` defaults to the policy's cap. For blind repetition ``n`` counts
    subframes and must be a whole number of blind rounds.
    """
    n = policy.max_subframes if n is None else int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if policy.kind is RetxKind.PLAIN_ARQ:
        return bler(curve, snr_dB) ** n
    if policy.kind is RetxKind.HARQ_COMBINING:
        return bler(curve, snr_dB + combining_gain_dB(n))
    if n % policy.n_blind:
        raise ValueError(f"n={n} is not a multiple of n_blind={policy.n_blind}")
    p_round = bler(curve, snr_dB + combining_gain_dB(policy.n_blind))
    return p_round ** (n // policy.n_blind)


@dataclass(frozen=True)
class Usage:
    expected_subframes: float
    residual_bler: float

    @property
    def converged(self) -> bool:
        return self.residual_bler <= 0.5


def usage(policy: RetxPolicy, curve, snr_dB: float) -> Usage:
    """Expected subframes spent per transport block, truncated at the policy cap."""
    if policy.kind is RetxKind.HARQ_COMBINING:
        m = np.arange(1, policy.max_transmissions + 1)
        q = bler(curve, snr_dB + combining_gain_dB(m))
        q = np.atleast_1d(q)
        return Usage(float(1.0 + np.sum(q[:-1])), float(q[-1]))
    if policy.kind is RetxKind.PLAIN_ARQ:
        p = bler(curve, snr_dB)
        M = policy.max_transmissions
        return Usage(_geometric_sum(p, M), p**M)
    p = bler(curve, snr_dB + combining_gain_dB(policy.n_blind))
    R = policy.max_rlc_rounds
    return Usage(policy.n_blind * _geometric_sum(p, R), p**R)


def _geometric_sum(p, n):
    # sum_{k<n} p^k, summed directly: the closed form cancels badly for p near 1
    return float(np.sum(np.power(min(p, 1.0), np.arange(n, dtype=float))))


def expected_subframes(policy: RetxPolicy, curve, snr_dB: float) -> float:
    u = usage(policy, curve, snr_dB)
    if not u.converged:
        raise NonConvergenceError(
            f"{policy.label} at {snr_dB} dB: residual {u.residual_bler:.3g} after "
            f"{policy.max_subframes} subframes; raise the cap")
    return u.expected_subframes


@dataclass(frozen=True)
class MonteCarloResult:
    residual_bler: float
    mean_subframes: float
    confidence_halfwidth: float  # 3 sigma on residual_bler
    residual_stderr: float
    subframes_stderr: float
    trials: int


def _mc_chunk(policy, curve, snr_dB, size, seed, index):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    if policy.kind is RetxKind.HARQ_COMBINING:
        M = policy.max_transmissions
        q = np.atleast_1d(bler(curve, snr_dB + combining_gain_dB(np.arange(1, M + 1))))
        u = rng.random(size)
        # q is decreasing: transmissions needed = 1 + #{m : u <= q_m}, capped
        fails_after = np.searchsorted(-q, -u, side="right")
        used = np.minimum(fails_after + 1, M)
        failed = fails_after >= M
    else:
        if policy.kind is RetxKind.PLAIN_ARQ:
            p, cap, per = bler(curve, snr_dB), policy.max_transmissions, 1
        else:
            p = bler(curve, snr_dB + combining_gain_dB(policy.n_blind))
            cap, per = policy.max_rlc_rounds, policy.n_blind
        if p >= 1.0:
            attempts = np.full(size, cap + 1)
        else:
            attempts = rng.geometric(1.0 - p, size)
        failed = attempts > cap
        used = np.minimum(attempts, cap) * per
    used = used.astype(np.int64)
    return int(failed.sum()), int(used.sum()), int((used * used).sum())


def monte_carlo_retx(policy: RetxPolicy, curve, snr_dB: float,
                     trials: int = 10**6, seed: int = 0, workers: int = 1) -> MonteCarloResult:
    """Simulate ``trials`` transport blocks under ``policy``.

    Trials are split into fixed-size chunks, each with its own stream
    derived from ``(seed, chunk index)``, so results do not depend on
    ``workers``.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    sizes = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        sizes.append(trials % MC_CHUNK)
    jobs = [(policy, curve, snr_dB, s, seed, i) for i, s in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _mc_chunk(*a), jobs))
    else:
        parts = [_mc_chunk(*a) for a in jobs]
    fails = sum(p[0] for p in parts)
    used = sum(p[1] for p in parts)
    used_sq = sum(p[2] for p in parts)

    p_hat = fails / trials
    p_adj = min(max(p_hat, 0.5 / trials), 1.0 - 0.5 / trials)
    se = math.sqrt(p_adj * (1.0 - p_adj) / trials)
    mean = used / trials
    var = max(used_sq / trials - mean**2, 0.0)
    return MonteCarloResult(p_hat, mean, 3.0 * se, se, math.sqrt(var / trials), trials)


@dataclass(frozen=True)
class HarqConfig:
    n_processes: int
    tbs_bits: int
    rtt_ms: float
    tti_ms: float = SUBFRAME_MS

    def __post_init__(self):
        if not (self.n_processes > 0 and self.tbs_bits > 0 and self.rtt_ms > 0 and self.tti_ms > 0):
            raise ValueError("HarqConfig fields must be positive")


@dataclass(frozen=True)
class CeModePreset:
    max_repetitions: int
    n_processes: int


CE_MODE_PRESETS = {
    "ce_mode_a": CeModePreset(max_repetitions=32, n_processes=10),
    "ce_mode_b": CeModePreset(max_repetitions=2048, n_processes=2),
}

CAT_M1_DL_TBS = 1000
CAT_M1_UL_TBS = 2984


def harq_config(preset: str, tbs_bits: int, rtt_ms: float, tti_ms: float = SUBFRAME_MS):
    return HarqConfig(CE_MODE_PRESETS[preset].n_processes, tbs_bits, rtt_ms, tti_ms)


def peak_rate(cfg: HarqConfig) -> float:
    """Stop-and-wait HARQ peak rate in bit/s: process-limited or TTI-limited."""
    return min(cfg.n_processes * cfg.tbs_bits / (cfg.rtt_ms / 1e3),
               cfg.tbs_bits / (cfg.tti_ms / 1e3))


def _ceil(x):
    # guards float noise such as 504/7000*1000 -> 72.00000000000001
    return math.ceil(round(x, 9))


def harq_processes_for_peak(rtt_ms: float, tti_ms: float = SUBFRAME_MS) -> int:
    if not (rtt_ms > 0 and tti_ms > 0):
        raise ValueError("rtt_ms and tti_ms must be positive")
    return max(1, _ceil(rtt_ms / tti_ms))


def transmission_duration_ms(tbs_bits: float, rate_bps: float) -> int:
    if not rate_bps > 0:
        raise ValueError("rate must be positive")
    return _ceil(tbs_bits / rate_bps * 1e3)


def required_repetitions(tbs_bits: float, achievable_rate_bps: float,
                         repetition_set: Sequence[int] = REPETITION_SET) -> int:
    """Smallest allowed repetition count covering the transmission time in subframes."""
    reps = list(repetition_set)
    if not reps or any(b <= a for a, b in zip(reps, reps[1:])):
        raise ValueError("repetition_set must be non-empty and strictly ascending")
    duration = transmission_duration_ms(tbs_bits, achievable_rate_bps)
    for r in reps:
        if r >= duration:
            return r
    raise ValueError(f"{duration} ms exceeds the largest repetition count {reps[-1]}")


# Figure data ----------------------------------------------------------------

def figure_policies():
    """Policies plotted in each figure, keyed by figure id."""
    return {
        "fig1": [RetxPolicy.harq(1), RetxPolicy.harq(2), RetxPolicy.harq(4),
                 RetxPolicy.arq(2), RetxPolicy.arq(4)],
        "fig2": [RetxPolicy.harq(4), RetxPolicy.blind(4, 1)],
        # caps raised so the low-SNR divergence shows up
        "fig3": [RetxPolicy.harq(CE_MODE_PRESETS["ce_mode_b"].max_repetitions),
                 RetxPolicy.blind(4, CE_MODE_PRESETS["ce_mode_b"].max_repetitions // 4)],
    }


def curve_rows(policies: Iterable[RetxPolicy], curve, grid: Sequence[float]):
    """Rows of ``CURVE_CSV_HEADER`` for every (snr, policy)."""
    rows = []
    policies = list(policies)
    for s in grid:
        for pol in policies:
            u = usage(pol, curve, float(s))
            rows.append((float(s), pol.label, pol.max_subframes, u.residual_bler,
                         u.expected_subframes, "" if u.converged else "nonconverged"))
    return rows


def write_curve_csv(path, rows):
    return write_csv(path, CURVE_CSV_HEADER, rows)
