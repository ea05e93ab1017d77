"""Delay, Doppler, link budget, retransmission and timer analysis for LTE-M over satellite."""

from .constants import PhysicalConstants
from .linkbudget import LinkBudgetInput, LinkBudgetResult, fspl, snr, sub_prb_sweep
from .orbit import OrbitScenario, PassSample, propagate_pass, rtt_transparent, slant_range
from .retx import BlerCurve, RetxKind, RetxPolicy, WaterfallCurve
from .scenario import Scenario, default_scenario

__version__ = "0.1.0"
