"""Physical constants shared across the package."""

import math

# Engineering value of the speed of light. The rounded figure keeps the
# 12.5 MHz -> 12 m range-resolution pairing exact.
SPEED_OF_LIGHT = 3.0e8  # m/s

BOLTZMANN = 1.380649e-23  # J/K

FOUR_PI_CUBED = (4.0 * math.pi) ** 3
