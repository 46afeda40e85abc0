"""Default parameters and run configuration for the PASCombUCB agent."""

import os

EPSILON = float(os.environ.get("PASCOMB_EPSILON", "0.01"))

SIGMA_SQ = 0.25

DELTA = 0.05

LOG_LEVEL = os.environ.get("PASCOMB_LOG_LEVEL", "INFO")

LOG_FORMAT = (
    "[%(asctime)s] p%(process)s {%(filename)s:%(lineno)d} %(levelname)s - %(message)s"
)

# Checkpoints per run and replication counts for curves and the safety-rate check.
CHECKPOINT_COUNT = 100
REPLICATIONS = 50
SAFETY_REPLICATIONS = 200

# Absolute slack on the Greedy-Split budget comparison.
SPLIT_TOLERANCE = 1e-12
