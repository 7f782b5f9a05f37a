"""Exception hierarchy.

Structural errors abort a scenario (exit code 2); failed checks never raise.
"""


class CodazziLabError(Exception):
    """Base class; ``stage`` names the pipeline stage that raised."""

    def __init__(self, message: str, stage: str | None = None, location=None):
        super().__init__(message)
        self.stage = stage
        if isinstance(location, tuple):
            location = tuple(int(x) if hasattr(x, "__index__") else x for x in location)
        self.location = location

    def __str__(self) -> str:
        msg = super().__str__()
        if self.location is not None:
            msg = f"{msg} at {self.location}"
        if self.stage:
            msg = f"[{self.stage}] {msg}"
        return msg


class GeometryError(CodazziLabError):
    pass


class DegenerateImmersion(GeometryError):
    pass


class ModelConstraintError(GeometryError):
    pass


class CatalogError(CodazziLabError):
    pass


class FrameDiscontinuity(GeometryError):
    pass


class IllConditionedChart(GeometryError):
    pass


class ResolutionError(CodazziLabError):
    pass


class HypothesisError(CodazziLabError):
    """Gate failure for an identity whose hypotheses are not met."""


class ChartError(CodazziLabError):
    pass


class ConfigError(CodazziLabError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(message, stage="config", location=", ".join(where) or None)
        self.line = line
        self.field = field
