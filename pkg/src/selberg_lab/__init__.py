"""Numerical experiments on the value distribution of automorphic L-functions near the critical line."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DomainError,
    InvalidArgument,
    LabError,
    PrecisionError,
    ResourceLimit,
    ScheduleInfeasible,
    TableTooShort,
)

__all__ = [
    "__version__",
    "DomainError",
    "InvalidArgument",
    "LabError",
    "PrecisionError",
    "ResourceLimit",
    "ScheduleInfeasible",
    "TableTooShort",
]
