"""
Configuration constants for the upsilon-lab numerical laboratory.
"""

import os
from pathlib import Path

# Versions - bump ARTIFACT_VERSION on any change that alters output bytes
ARTIFACT_VERSION = "1.0.0"
SCHEMA_VERSION = 1

# Paths
# Get the project root directory (where this config.py file is located)
PROJECT_ROOT = Path(__file__).parent
OUTPUT_DIR = Path(os.environ.get("UPSILON_LAB_OUTPUT_DIR", PROJECT_ROOT / "results"))

# Logging
LOG_LEVEL = os.environ.get("UPSILON_LAB_LOG_LEVEL", "WARNING").upper()

# Transport
ORACLE_MASS_CAP = 8
DISTANCE_TOLERANCE = 1e-9

# Test function validation (central finite differences)
FD_STEP = 1e-4
FD_TOLERANCE = 1e-5
FD_PROBES = 100
FD_SEED = 20240611

# Half-width of the smoothing neighbourhood around tent kinks
KINK_WIDTH = 0.05

# Quadrature and stratification
QUADRATURE_NODES = 64
MECKE_STRATA = 64

# MCMC defaults (birth, death, move)
MCMC_BURN_IN = 5_000
MCMC_THINNING = 20
MCMC_PROPOSAL_MIX = (1 / 3, 1 / 3, 1 / 3)
MCMC_MOVE_SCALE_FRACTION = 0.1
STUCK_ACCEPTANCE = 1e-3

# Diffusion
DEFAULT_DT = 1e-3
DT_PER_TMIN = 50
MIN_HITS = 10
STEP_DRIFT_FRACTION = 0.5
BOUNDARY_SIGMAS = 3.0

# Statistical gates
SIGNIFICANCE = 0.01
SIGMA_GATE = 3.0
