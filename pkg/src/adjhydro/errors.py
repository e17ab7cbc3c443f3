"""Exception types raised across the package."""


class AdjHydroError(Exception):
    """Base class for all package errors."""


class NonFiniteState(AdjHydroError):
    def __init__(self, stage, where=""):
        self.stage = stage
        msg = f"non-finite values in stage {stage}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class CheckpointMiss(AdjHydroError):
    pass


class ObjectiveGradientShapeMismatch(AdjHydroError):
    pass


class OutOfOrderOffer(AdjHydroError):
    pass


class NoCheckpointAtOrBefore(AdjHydroError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"no checkpoint at or before step {k}; store is corrupted")


class ParticleOverlap(AdjHydroError):
    pass


class InvertedElement(AdjHydroError):
    pass


class SolverDiverged(AdjHydroError):
    pass


class EosOutOfRange(AdjHydroError):
    pass


class TracerOutsideElement(AdjHydroError):
    pass


class ConstraintLoopStalled(AdjHydroError):
    def __init__(self, error, iterations):
        self.error = error
        self.iterations = iterations
        super().__init__(
            f"constraint loop stalled after {iterations} iterations "
            f"(infeasibility {error:.3e})"
        )


class StepFailure(AdjHydroError):
    pass


class ConfigError(AdjHydroError):
    """Invalid run configuration; ``line`` points into the source file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}".strip())
