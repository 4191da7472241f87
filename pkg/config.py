"""
Shared constants and logging setup for the bracket checker
"""

import logging

import numpy as np

TOOL_NAME = "jacobi-bracket-check"
__version__ = "0.3.0"

# Metric signature (+,-,-,-) so that U.U = +1 on shell
SIGNATURE = (1.0, -1.0, -1.0, -1.0)
MINKOWSKI = np.diag(SIGNATURE)
DIM = 4

# Tolerances
ANALYTIC_TOL = 1e-8
FINITE_DIFFERENCE_TOL = 1e-5
SHELL_TOL = 1e-10
EOM_AGREEMENT_TOL = 1e-6
METRIC_INVERSE_TOL = 1e-12

# Finite differences: h = FD_REL_STEP * max(1, |x_i|)
FD_REL_STEP = 1e-5

# Sampling
SINGULAR_RADIUS = 1e-3
MAX_SAMPLE_SPEED = 0.9
DEFAULT_SAMPLE_COUNT = 100
DEFAULT_SEED = 20240101
MAX_SAMPLE_ATTEMPTS = 10000
N_JOBS = 1

# Implicit midpoint iteration
MIDPOINT_TOL = 1e-12
MIDPOINT_MAX_ITER = 100

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def fd_steps(point, rel_step=FD_REL_STEP):
    """Per-component central-difference steps for a point"""
    point = np.asarray(point, dtype=float)
    return rel_step * np.maximum(1.0, np.abs(point))


def setup_logging(quiet=False):
    """Configure logging the same way for every entry point"""
    level = logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    return logging.getLogger(TOOL_NAME)
