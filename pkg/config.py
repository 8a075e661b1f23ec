import os
from pathlib import Path

from dotenv import load_dotenv

# Load .env file for local development
load_dotenv()

# Runtime settings from environment variables
cache_dir = Path(
    os.getenv('DWLAB_CACHE_DIR', str(Path.home() / '.cache' / 'dissipative-wave-lab'))
).expanduser()
log_level = os.getenv('DWLAB_LOG_LEVEL', 'INFO')
default_threads = int(os.getenv('DWLAB_THREADS', '1'))
max_freq_cap = float(os.getenv('DWLAB_MAX_FREQ_CAP', '1e10'))
panel_budget = int(os.getenv('DWLAB_PANEL_BUDGET', '4000000'))

CODE_VERSION = "dissipative-wave-lab 1.0.0"
CSV_SCHEMA_VERSION = 1
NORMALIZATION_TAG = "(2pi)^-n"

# Mode evaluation
DEGENERATE_EPS = 1e-6
PHI1_SERIES_SWITCH = 1e-3

# Symbol checks
MH_STABILITY_FACTOR = 10.0
MH_GROWTH_PER_SHELL = 0.15
MH_LOG_EPS = 0.25
MH_SHELLS = 10
MH_SAMPLES_PER_SHELL = 64

# Fits and verdicts
POWER_TOL = 0.1
LOWER_BOUND_TOL = 0.15
LOG_COEF_TOL = 0.10
EPS_CFG = 0.1
SANDWICH_TOL = 1e-2
FIT_MIN_POINTS = 6
FIT_MAX_REL_QUAD_ERROR = 1e-2

# Cache
CACHE_REVALIDATION_TOL = 1e-12
