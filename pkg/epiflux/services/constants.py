"""Centralized numerical defaults for services.

Conservative defaults; callers may override per call.
"""

from __future__ import annotations

# Mean-field integration step (years)
DEFAULT_ODE_STEP: float = 1e-3

# Sampling grid spacing (years)
DEFAULT_GRID_DT: float = 1e-2

# Monte Carlo ensemble size
DEFAULT_RUNS: int = 500

# Tolerance below zero accepted for integrated fractions
NEGATIVE_TOLERANCE: float = 1e-9

# Uniform draws fetched from the bit generator per refill
RNG_BLOCK_SIZE: int = 4096

# Runs between ensemble progress records
PROGRESS_EVERY_RUNS: int = 100

# Sigma entries at or below this share of the largest are left out of comparisons
COVARIANCE_ENTRY_FLOOR: float = 0.05
