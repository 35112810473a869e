"""
Configuration Module

This module loads environment variables and defines global configuration settings
for the toolkit, such as log verbosity, numerical tolerances used by the stability
analysis, and simulation defaults.

Dependencies:
    - dotenv for loading environment variables
    - logging for application warnings
"""
import os
import logging
from dotenv import load_dotenv, find_dotenv

# Load environment variables from a .env file when one is present
if not load_dotenv(find_dotenv(usecwd=True)):
    logging.debug("No .env file found, using process environment and defaults.")

# -----------------------------------
# Logging Configuration
# -----------------------------------
LOG_LEVEL = os.getenv("SKEWLESS_LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(module)s: %(message)s"

# -----------------------------------
# Numerical Tolerances
# -----------------------------------
# Radius around 1 inside which an eigenvalue of A counts as "one"
EIGEN_ONE_RADIUS = float(os.getenv("SKEWLESS_EIGEN_ONE_RADIUS", "1e-7"))

# Max backward error sigma_min(A - rho I) / ||A|| of a per-mode cubic root rho
MATCH_TOLERANCE = float(os.getenv("SKEWLESS_MATCH_TOLERANCE", "1e-7"))

# Imaginary parts below IMAG_TOLERANCE * ||M|| are treated as zero
IMAG_TOLERANCE = float(os.getenv("SKEWLESS_IMAG_TOLERANCE", "1e-9"))

# Reported slack for the strict |mu| < 1 comparison
SCHUR_SLACK = float(os.getenv("SKEWLESS_SCHUR_SLACK", "1e-9"))

# Residual bounds for the left null vector and the Jordan chains
NULL_VECTOR_RESIDUAL = 1e-10
JORDAN_RESIDUAL = 1e-9

# -----------------------------------
# Simulation Defaults
# -----------------------------------
DIVERGENCE_THRESHOLD = float(os.getenv("SKEWLESS_DIVERGENCE_THRESHOLD", "1e3"))
SKEW_SPREAD = float(os.getenv("SKEWLESS_SKEW_SPREAD", "1e-4"))
MAX_WORKERS = int(os.getenv("SKEWLESS_MAX_WORKERS", "1"))

# -----------------------------------
# Metrics Defaults
# -----------------------------------
TRANSIENT_FRACTION = float(os.getenv("SKEWLESS_TRANSIENT_FRACTION", "0.2"))
CONVERGENCE_THRESHOLD = float(os.getenv("SKEWLESS_CONVERGENCE_THRESHOLD", "1e-5"))
CONVERGENCE_HOLD = int(os.getenv("SKEWLESS_CONVERGENCE_HOLD", "10"))

# -----------------------------------
# File Formats
# -----------------------------------
CONFIG_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
CSV_SIGNIFICANT_DIGITS = 17
TRACE_CSV_HEADER = ["step", "time_s", "node", "offset_to_leader_s", "s", "y"]
