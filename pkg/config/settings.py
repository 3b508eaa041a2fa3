"""
Default settings for convexity-atlas.

Values here are read at import time by the library and the command line
front end. Anything that changes a numerical result is also recorded in the
output it affects (certificates record their resolution, trajectories their
tolerances).
"""

# Sample counts (n_r, n_theta, n_w, n_t) of the filled-domain grid
DEFAULT_RESOLUTION = (40, 64, 16, 8)

# |2v^2 - 1| below this is treated as the sun collision
SINGULARITY_GUARD = 1e-9
INTEGRATION_SINGULARITY_GUARD = 1e-6

# q within this distance of a primary is a collision
COLLISION_GUARD = 1e-12

# Flow integration
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_DRIFT_BOUND = 1e-8
ON_SURFACE_TOL = 1e-8
SECTION_TOL = 1e-10
TRANSVERSALITY_TOL = 1e-10
RETURN_MAP_MAX_TIME = 1000.0

# Symmetric orbit shooting
ORBIT_RTOL = 1e-12
ORBIT_ATOL = 1e-14
ORBIT_U1_TOL = 1e-10
MONODROMY_STEP = 1e-7

# Convexity verdicts
DEGENERATE_BAND = 1e-12
MIN_DOMAIN_RADIUS = 1e-9
SURFACE_RESIDUAL_TOL = 1e-10

# Cyclic Jacobi eigen-solver
JACOBI_OFFDIAG_TOL = 1e-13
JACOBI_MAX_SWEEPS = 50

# Radial continuation of the Hill component
HILL_RADIAL_STEPS = 4096
HILL_MAX_RADIUS = 1.5
HILL_SUN_APPROACH = 1e-3

# Lagrange points
LAGRANGE_XTOL = 1e-14
LAGRANGE_SCAN_STEP = 1e-2

# Slice {v2 = u1 = 0} in the (v1, u2) plane
SLICE_DEFAULT_BBOX = (-0.8, 0.8, -1.5, 1.5)
SLICE_DEFAULT_GRID = (321, 321)
SLICE_RESIDUAL_TOL = 1e-8

# Witness search
WITNESS_SEEDS = 8
WITNESS_MAXITER = 400

# Output
FLOAT_FORMAT = '%.17g'
SVG_HASHSALT = 'convexity-atlas'
OUTPUT_DIR = 'data/processed'

# Environment overrides
JOBS_ENV_VAR = 'CONVEXITY_ATLAS_JOBS'
LOG_LEVEL_ENV_VAR = 'CONVEXITY_ATLAS_LOG_LEVEL'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
