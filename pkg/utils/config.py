"""
Configuration settings for the Lipschitz Outer Space toolkit.
"""

import os
from pathlib import Path


def _int_env(name, default):
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


# Application
APP_NAME = "lipschitz-outer"
SAMPLES_DIR = Path(os.getenv("LIPSCHITZ_SAMPLES_DIR", Path(__file__).resolve().parent.parent / "samples"))

# Group limits
MAX_GROUP_ORDER = _int_env("LIPSCHITZ_MAX_GROUP_ORDER", 64)

# Rendering
LOG_DIGITS = _int_env("LIPSCHITZ_LOG_DIGITS", 12)

# Search budgets
BRUTE_FORCE_MAX_EDGES = _int_env("LIPSCHITZ_BRUTE_MAX_EDGES", 8)
NODE_BUDGET = _int_env("LIPSCHITZ_NODE_BUDGET", 2_000_000)
CANDIDATE_BUDGET = _int_env("LIPSCHITZ_CANDIDATE_BUDGET", 200_000)
FOLD_BUDGET = _int_env("LIPSCHITZ_FOLD_BUDGET", 64)
SPINE_BUDGET = _int_env("LIPSCHITZ_SPINE_BUDGET", 4096)

# Parallelism
DEFAULT_THREADS = _int_env("LIPSCHITZ_THREADS", 1)

# Logging
LOG_LEVEL = os.getenv("LIPSCHITZ_LOG_LEVEL", "WARNING")
