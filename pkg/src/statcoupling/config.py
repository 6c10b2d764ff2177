"""Process-wide numeric defaults."""

import os

DEFAULT_ENUM_CAP = 10**7
ENUM_CAP_ENV = "STATCOUPLING_ENUM_CAP"
MERGE_TOL = 1e-12


def enumeration_cap(cap=None):
    """Resolve the enumeration cap: explicit argument, then env var, then default."""
    if cap is not None:
        return int(cap)
    env = os.environ.get(ENUM_CAP_ENV)
    if env:
        return int(float(env))
    return DEFAULT_ENUM_CAP
