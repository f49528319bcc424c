"""Exception hierarchy shared by the control stack."""

from __future__ import annotations


class LocomanipError(Exception):
    """Base class for every error raised by the control stack."""


class SingularityError(LocomanipError, ValueError):
    """Raised when the Euler-rate map is evaluated inside the pitch guard."""

    def __init__(self, pitch: float, guard: float) -> None:
        super().__init__(f"Pitch {pitch:.4f} rad is within {guard:.4f} rad of the Euler-rate singularity")
        self.pitch = pitch
        self.guard = guard


class ModelFileError(LocomanipError, ValueError):
    """Raised when a robot model description is malformed."""


class QpDimensionError(LocomanipError, ValueError):
    """Raised for inconsistent QP dimensions or non-finite problem data."""


class MpcInfeasibleError(LocomanipError):
    """The horizon QP has no feasible point; ``classes`` names the violated constraint groups."""

    def __init__(self, classes, solution=None) -> None:
        self.classes = tuple(classes)
        self.solution = solution
        names = ", ".join(self.classes) or "unknown"
        super().__init__(f"MPC problem infeasible (violated: {names})")


class WbcInfeasibleError(LocomanipError):
    """The whole-body QP has no feasible point."""

    def __init__(self, classes, solution=None) -> None:
        self.classes = tuple(classes)
        self.solution = solution
        names = ", ".join(self.classes) or "unknown"
        super().__init__(f"WBC problem infeasible (violated: {names})")


class SimulationBlowUpError(LocomanipError):
    def __init__(self, time: float, detail: str = "non-finite state") -> None:
        super().__init__(f"Simulation blew up at t={time:.4f}s: {detail}")
        self.time = time


class AttachError(LocomanipError):
    """Raised when an attach is requested with the object out of reach."""


class ScenarioError(LocomanipError, ValueError):
    """Raised for invalid or missing scenario files."""


class MetricMismatchError(LocomanipError, ValueError):
    """Raised when two reports do not carry the same metrics."""
