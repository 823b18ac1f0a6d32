"""Conversion from the package's natural units to SI.

Internally every rate shares one angular-frequency unit and hbar * Omega_0 = 1,
so a power is a photon flux. Pick ``rate_unit`` (that unit expressed in rad/s)
and, for powers, the carrier angular frequency ``omega_0`` in rad/s.
"""

import math

from scipy.constants import hbar

from .errors import ParameterError

KINDS = ("rate", "frequency", "time", "power", "flux")


def to_si(value, kind, rate_unit, omega_0=None):
    """Convert ``value`` of the given ``kind`` to SI.

    ``rate`` -> rad/s, ``frequency`` -> Hz (a rate divided by 2 pi),
    ``time`` -> s, ``flux`` -> photons/s, ``power`` -> W (needs ``omega_0``).
    """
    if not rate_unit > 0:
        raise ParameterError("rate_unit must be positive")
    if kind == "rate":
        return value * rate_unit
    if kind == "frequency":
        return value * rate_unit / (2 * math.pi)
    if kind == "time":
        return value / rate_unit
    if kind == "flux":
        return value * rate_unit
    if kind == "power":
        if omega_0 is None or not omega_0 > 0:
            raise ParameterError("power conversion needs a positive carrier omega_0 in rad/s")
        return value * rate_unit * hbar * omega_0
    raise ParameterError(f"unknown kind {kind!r}; expected one of {KINDS}")
