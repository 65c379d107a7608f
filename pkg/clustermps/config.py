"""
Numerical constants and defaults shared by the simulator, the oracle and the CLI.

Every function that depends on one of these takes a keyword override, so the
values here are defaults rather than global switches.
"""

# Schmidt coefficients at or below this are treated as numerical zeros and
# removed together with their tensor columns.
EPS_TRUNC = 1e-12

# Projecting onto an outcome with probability at or below this is an error.
EPS_PROB = 1e-12

# Negative eigenvalues of a reduced density matrix above -EPS_CLAMP are
# rounding noise and are clamped to zero; anything more negative is a bug.
EPS_CLAMP = 1e-12

# Accepted deviation of an input state's norm from 1.
NORM_TOL = 1e-8

# Accepted deviation of U^dagger U from the identity.
UNITARY_TOL = 1e-10

# Default tolerance of MpsState.check_canonical.
CANONICAL_TOL = 1e-9

# Largest accepted infidelity of `run --verify` against the dense replay.
VERIFY_TOL = 1e-9

# Largest qubit count for which dense (2^n) vectors are ever formed.
DENSE_LIMIT = 20

# Version tag written into state dumps and run reports.
SCHEMA_VERSION = 1

DEFAULT_SEED = 0
