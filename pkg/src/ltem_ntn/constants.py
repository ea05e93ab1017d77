"""Physical constants shared by the geometry, link budget and sync code."""

import math
from dataclasses import dataclass, asdict

from scipy import constants as _sc

SPEED_OF_LIGHT = _sc.c  # m/s
BOLTZMANN = _sc.k  # J/K
# -10*log10(k), dB(W/(K*Hz))
BOLTZMANN_DB = -10.0 * math.log10(BOLTZMANN)

EARTH_ROTATION_RATE = 7.2921e-5  # rad/s, sidereal
SIDEREAL_DAY_S = 2.0 * math.pi / EARTH_ROTATION_RATE

SUBFRAME_MS = 1.0


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants used by the orbit geometry.

    Units: ``c`` in m/s, ``Re`` in km, ``mu`` in km^3/s^2, ``v_eq`` in km/s.
    """

    c: float = SPEED_OF_LIGHT
    Re: float = 6371.0
    mu: float = 398600.4418
    v_eq: float = 0.4651

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @property
    def c_km_s(self) -> float:
        return self.c / 1000.0

    @classmethod
    def from_dict(cls, d):
        return cls(**d) if d else cls()

    def to_dict(self):
        return asdict(self)


DEFAULT_CONSTANTS = PhysicalConstants()
