"""Physical constants, CODATA 2018 exact/recommended values (SI)."""

ELEMENTARY_CHARGE = 1.602176634e-19  # C
BOLTZMANN = 1.380649e-23  # J/K
EPSILON_0 = 8.8541878128e-12  # F/m
ELECTRON_MASS = 9.1093837015e-31  # kg
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

# Deuterium, used by the reference scenario configs.
DEUTERIUM_MASS = 2.01410177812 * ATOMIC_MASS_UNIT  # kg
