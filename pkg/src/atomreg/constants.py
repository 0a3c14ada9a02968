"""Physical constants and unit conversions used across the package.

Canonical units: gauss, micrometer, microsecond, kilohertz (linear frequency).
"""

import math

from scipy import constants as _c

BOLTZMANN = _c.k  # J/K
CS_MASS = 2.20695e-25  # kg, caesium-133

GAUSS_PER_CM_TO_GAUSS_PER_UM = 1e-4
MHZ_TO_KHZ = 1e3
KHZ_TO_HZ = 1e3

# kHz (linear) -> rad/us (angular)
KHZ_TO_RAD_PER_US = 2.0 * math.pi * 1e-3
