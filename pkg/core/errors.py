from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for failures raised by the lab"""


class GridMismatchError(LabError, ValueError):
    """Binary field operation across two different grids"""


class ConfigError(LabError, ValueError):
    """Experiment configuration could not be parsed or validated"""


class BlowupError(LabError):
    """Time stepping produced a non-finite or runaway solution.

    The partially recorded trajectory travels with the exception so callers
    can still persist what was computed before the abort.
    """

    def __init__(self, message: str, step: int, time: float, partial: Optional[Any] = None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.partial = partial


class ModulationError(LabError):
    """The modulation decomposition failed (Newton divergence, tube exit, collision)"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
