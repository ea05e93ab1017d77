"""Receiver SNR from a dB link budget, plus the sub-PRB bandwidth sweep."""

import math
from dataclasses import dataclass, asdict, field, replace
from typing import Dict, List, Sequence, Tuple

from ._io import write_csv
from .constants import BOLTZMANN_DB, SPEED_OF_LIGHT

SWEEP_CSV_HEADER = ("bandwidth_hz", "snr_db")

# Summation order of the budget terms; the breakdown map follows it.
TERM_ORDER = ("eirp", "g_over_t", "boltzmann", "fspl", "shadow_fading",
              "scintillation_loss", "atmospheric_loss", "polarization_loss", "bandwidth")


@dataclass(frozen=True)
class LinkBudgetInput:
    eirp_dBW: float
    g_over_t_dB_per_K: float
    bandwidth_Hz: float
    fspl_dB: float
    atmospheric_loss_dB: float = 0.0
    polarization_loss_dB: float = 0.0
    scintillation_loss_dB: float = 0.0
    shadow_fading_dB: float = 0.0

    def __post_init__(self):
        if not self.bandwidth_Hz > 0:
            raise ValueError(f"bandwidth_Hz must be positive, got {self.bandwidth_Hz!r}")
        for name in ("atmospheric_loss_dB", "polarization_loss_dB",
                     "scintillation_loss_dB", "shadow_fading_dB"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LinkBudgetResult:
    snr_dB: float
    breakdown: Dict[str, float] = field(default_factory=dict)

    def table(self) -> str:
        width = max(len(k) for k in self.breakdown)
        lines = [f"{k:<{width}}  {v:+10.3f} dB" for k, v in self.breakdown.items()]
        lines.append(f"{'snr':<{width}}  {self.snr_dB:+10.3f} dB")
        return "\n".join(lines)


def snr(budget: LinkBudgetInput) -> LinkBudgetResult:
    """Receiver SNR in dB with a per-term breakdown.

    The breakdown values are signed contributions, summed left to right in
    ``TERM_ORDER`` to give ``snr_dB``.
    """
    if not budget.bandwidth_Hz > 0:
        raise ValueError("bandwidth_Hz must be positive")
    terms = {
        "eirp": budget.eirp_dBW,
        "g_over_t": budget.g_over_t_dB_per_K,
        "boltzmann": BOLTZMANN_DB,
        "fspl": -budget.fspl_dB,
        "shadow_fading": -budget.shadow_fading_dB,
        "scintillation_loss": -budget.scintillation_loss_dB,
        "atmospheric_loss": -budget.atmospheric_loss_dB,
        "polarization_loss": -budget.polarization_loss_dB,
        "bandwidth": -10.0 * math.log10(budget.bandwidth_Hz),
    }
    total = 0.0
    for name in TERM_ORDER:
        total += terms[name]
    return LinkBudgetResult(total, terms)


def fspl(distance_km: float, carrier_Hz: float) -> float:
    """Free-space path loss in dB."""
    if not (distance_km > 0 and carrier_Hz > 0):
        raise ValueError("distance and carrier frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_km * 1e3 * carrier_Hz / SPEED_OF_LIGHT)


def sub_prb_sweep(base: LinkBudgetInput, bandwidths_Hz: Sequence[float]) -> List[Tuple[float, float]]:
    """SNR at each bandwidth with every other term of ``base`` held fixed."""
    if len(bandwidths_Hz) == 0:
        raise ValueError("bandwidths_Hz must be non-empty")
    return [(float(bw), snr(replace(base, bandwidth_Hz=bw)).snr_dB) for bw in bandwidths_Hz]


def write_sweep_csv(path, sweep):
    return write_csv(path, SWEEP_CSV_HEADER, sweep)


# Set-1 style S-band (2 GHz) parameters for GEO and LEO, DL and UL.
TABLE2_FIXTURES = {
    "geo_dl": LinkBudgetInput(59.3, -31.6, 1080e3, 190.63, 0.190, 3.0, 2.2, 3.0),
    "geo_ul": LinkBudgetInput(-7.0, 19.0, 30e3, 190.63, 0.190, 3.0, 2.2, 3.0),
    "leo_dl": LinkBudgetInput(34.3, -31.6, 1080e3, 159.1, 0.1, 3.0, 2.2, 3.0),
    "leo_ul": LinkBudgetInput(-7.0, 1.1, 30e3, 159.1, 0.1, 3.0, 2.2, 3.0),
}

SUB_PRB_BANDWIDTHS_HZ = (30e3, 45e3, 90e3)
FULL_PRB_HZ = 180e3
