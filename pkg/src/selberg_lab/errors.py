"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage/config errors exit 2,
resource and precision errors exit 3.
"""


class LabError(Exception):
    pass


class InvalidArgument(LabError, ValueError):
    pass


class DomainError(LabError, ValueError):
    """Input hits a pole or leaves the domain of a special function."""


class ResourceLimit(LabError):
    pass


class PrecisionError(LabError, ArithmeticError):
    pass


class TableTooShort(LabError):
    def __init__(self, required: int, available: int, what: str = "coefficient table"):
        self.required = int(required)
        self.available = int(available)
        super().__init__(f"{what} covers n <= {available}, need n <= {required}")


class ScheduleInfeasible(LabError, ValueError):
    pass
