import os
from typing import Dict, Tuple

# Default tolerance for truncating transition rows
DEFAULT_EPS = 1e-10

# Largest support a single transition row may span before giving up
MAX_SUPPORT = int(os.environ.get("NBMARKOV_MAX_SUPPORT", "200000"))

# Above this value of c*t, e^{ct} overflows soon; theta is taken in log space
LOG_THETA_SWITCH = 700.0

# Start box for the multi-start simplex search (natural scale)
DEFAULT_START_BOX: Dict[str, Tuple[float, float]] = {
    "r": (0.2, 20.0),
    "q": (0.05, 0.95),
    "c": (0.05, 5.0),
}

MIN_FIT_LENGTH = 10

DEFAULT_HORIZONS = (1, 2, 3, 4)

LOG_LEVEL = os.environ.get("NBMARKOV_LOG_LEVEL", "WARNING").upper()
