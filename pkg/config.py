# config.py
import os
from typing import Dict, Tuple

# Grid Settings
DEFAULT_ALPHA_GRID = 201  # Points on the alpha grid of a boundary slice
DEFAULT_KNOB_GRID = 201  # Points per remaining auxiliary knob (beta, eta, gamma)
OUTER_KNOB_GRID = 61  # Points per knob for models with two free knobs besides alpha
MEMBERSHIP_GRID_BUDGET = 250_000  # Max grid cells evaluated before refinement in membership()
DEFAULT_SPLIT_GRID = 21  # Power-split grid for sum-power sweeps
GOLDEN_SECTION_ITERS = 60  # Golden-section steps per free knob when refining a slice

# Numerical Tolerances
IDENTITY_TOL = 1e-12  # Formula identities
ORACLE_TOL = 1e-9  # Closed form vs log-det oracle
CONTAINMENT_EPS = 1e-6  # Default eps (bits) for contains()
NORMALIZATION_TOL = 1e-12  # pmf / transition tensor normalization
MARKOV_TOL = 1e-9  # Markov-chain violation (bits) accepted in factorized distributions
DEGRADED_TOL = 1e-9  # Factorization residual accepted by check_degraded
CHANNEL_FILE_TOL = 1e-9  # Row-sum tolerance when loading a DM channel file
PSD_TOL = 1e-10  # Eigenvalue tolerance for covariance matrices
SAMPLE_LOADING = 1e-12  # Diagonal loading in the sampled MI path only

# Beta* Solver
BISECTION_MAXITER = 200  # Iterations of the bisection fallback
BISECTION_XTOL = 1e-15  # Absolute tolerance on beta for the bisection fallback
DISCRIMINANT_MARGIN = 1e-14  # Relative discriminant below which the fallback is used

# Monte-Carlo Oracle
DEFAULT_SEED = 20240601  # Seed used when --seed is not given
PLUGIN_SAMPLES = 200_000  # Samples per plug-in estimate
MIN_PLUGIN_SAMPLES = 1_000  # Smallest accepted sample count
JACKKNIFE_BLOCKS = 20  # Blocks for the delete-one-block jackknife
ORACLE_SWEEP_POINTS = 1_000  # Random (params, aux) points in the verify sweep
PLUGIN_SPOT_CHECKS = 10  # Plug-in spot checks in the verify sweep
DEGRADEDNESS_SAMPLES = 100_000  # Samples for the sampled partial correlation

# DM Search
DM_RESTARTS = 20  # Random restarts for the degraded capacity search
DM_WEIGHTS = 3  # Weighted-sum directions refined per restart
DM_COORD_ITERS = 12  # Bounded scalar-search iterations per logit
DM_REFINE_PASSES = 1  # Coordinate-ascent passes per refinement
DM_LOGIT_RANGE = 6.0  # Half-width of the bounded scalar search on one logit
DM_SUITE_DISTRIBUTIONS = 200  # Random distributions per channel in the discrete identity suites

# CLI Channel Defaults
DEFAULT_CHANNEL: Dict[str, float] = {
    "P": 10.0,
    "P1": 5.0,
    "P2": 5.0,
    "N1": 1.0,
    "N2": 4.0,
}
DEFAULT_MODEL = "dawgn-partial"
DEFAULT_FIGURE_DIR = "figures"  # run_figure writes into <dir>/<figure-id> unless --out is given

# Figure Defaults (the source figures do not state their parameters)
FIGURE_PARAMS: Dict[str, float] = {
    "P": 10.0,
    "N1": 1.0,
    "N2": 4.0,
    "P2": 5.0,
}
FIGURE_RELAY_POWERS: Tuple[float, ...] = (1.0, 5.0, 15.0, 30.0)
FIGURE_IDS = ("fig4", "fig5", "fig8", "fig10", "fig11")

# Output Settings
SIGNIFICANT_DIGITS = 12  # Digits printed for every numeric output
OUTPUT_FORMATS = ("csv", "json")
CSV_HEADER = ("model", "alpha", "beta", "gamma", "eta", "r0", "r1", "r2")

# Exit Codes
EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_ORACLE_FAILURE = 3

# Logging Configuration
LOG_LEVEL = "INFO"
LOG_FILE = "logs/rbc_analysis.log"

# Concurrency
MAX_CONCURRENT_TASKS = max(1, int(os.environ.get("RBC_THREADS", "4")))  # Slice computations in flight

# Cache Settings
CACHE_MAX_ENTRIES = 256  # Memoized slices kept by cache.cached
