"""Physical constants shared across the package (km / s / K units)."""

MU_EARTH = 398600.4418
"""Gravitational parameter of Earth, km^3/s^2."""

EARTH_RADIUS_KM = 6378.137
"""Spherical Earth radius, km."""

EARTH_ROTATION_RAD_S = 7.2921159e-5
"""Earth rotation rate, rad/s."""

LIGHT_SPEED_KM_S = 299792.458
"""Speed of light, km/s."""

BOLTZMANN_J_PER_K = 1.380649e-23
"""Boltzmann constant, J/K."""
