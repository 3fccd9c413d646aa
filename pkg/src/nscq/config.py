"""Global numerical settings.

Every verdict produced by the toolkit is ultimately a rank or a sign test, so
the thresholds live in one place. Functions accept ``tol=None`` and fall back
to the values here.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, fields, replace


@dataclass
class Settings:
    rank_tol: float = 1e-8  # relative singular-value threshold
    feas_tol: float = 1e-8  # feasibility and active-set classification
    kink_tol: float = 1e-9  # branch gap deciding max/min/abs activity
    lp_tol: float = 1e-9  # primal feasibility in linear feasibility problems
    branch_cap: int = 3**12  # complementarity branch enumeration
    subset_cap: int = 2**12  # index-subset enumeration in the probes
    multiplier_box: float = 1e6  # bound on ||multipliers||_1 in stationarity
    seed: int = 20240601


settings = Settings()


@contextlib.contextmanager
def override(**kwargs):
    """Temporarily change global settings.

    >>> with override(rank_tol=1e-6):
    ...     pass
    """
    names = {f.name for f in fields(Settings)}
    unknown = set(kwargs) - names
    if unknown:
        raise TypeError(f"unknown settings: {sorted(unknown)}")
    saved = replace(settings)
    for key, val in kwargs.items():
        setattr(settings, key, val)
    try:
        yield settings
    finally:
        for f in fields(Settings):
            setattr(settings, f.name, getattr(saved, f.name))
