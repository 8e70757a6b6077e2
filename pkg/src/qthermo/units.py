"""Physical constants and the SI reporting layer.

Everything inside the package runs in natural units (k_B = 1, hbar = 1).
These helpers convert at the output boundary only.
"""

import math

KB = 1.380649e-23  # J/K, exact (2019 SI)
HBAR = 1.054571817e-34  # J s, exact (2019 SI)
LN2 = math.log(2.0)


def thermal_to_joules(value: float) -> float:
    """Energy expressed in kelvin (k_B = 1) to joules."""
    return KB * value


def angular_to_joules(value: float) -> float:
    """Energy expressed as an angular frequency in rad/s (hbar = 1) to joules."""
    return HBAR * value


def kelvin_to_angular(temperature_k: float) -> float:
    # k_B T / hbar, so a temperature can share units with qubit frequencies
    return KB * temperature_k / HBAR


def nats_to_bits(value: float) -> float:
    return value / LN2


def bits_to_nats(value: float) -> float:
    return value * LN2
