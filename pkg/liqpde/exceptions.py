# Copyright (c) 2026 liqpde developers
# MIT License

from typing import Any, Optional, Sequence


class LiquidationError(Exception):
    """
    Base class for every error raised by liqpde.
    """

    pass


class ConfigError(LiquidationError):
    """
    Raised when an experiment configuration cannot be parsed or validated.
    """

    pass


class AssumptionViolation(LiquidationError):
    """
    Raised when a standing assumption of the liquidation model fails on the
    validation mesh. Carries the assumption name and the witness node.
    """

    def __init__(self, assumption: str, detail: str, witness: Optional[Sequence[float]] = None):
        self.assumption = assumption
        self.witness = None if witness is None else tuple(float(w) for w in witness)
        where = "" if self.witness is None else f" at y={list(self.witness)}"
        super().__init__(f"{assumption}: {detail}{where}")


class GrowthConditionViolation(LiquidationError):
    """
    Raised when |u| > t*eta is passed to the transformed nonlinearity; the
    binomial series is not guaranteed to converge there.
    """

    pass


class SingularTimeError(LiquidationError):
    """
    Raised when the value function is evaluated at or beyond the terminal time.
    """

    pass


class SolverError(LiquidationError):
    """
    Raised when the time step of the PDE solver falls below the minimum step.
    """

    def __init__(self, message: str, time: float, node: Any = None):
        self.time = time
        self.node = node
        super().__init__(message)


class SurfaceRequired(LiquidationError):
    """
    Raised when a feedback strategy is requested without a value surface.
    """

    pass


class UnknownExperiment(LiquidationError):
    """
    Raised when an experiment name is not registered.
    """

    pass


class RunNotFound(LiquidationError):
    """
    Raised when a run is not found in the registry.
    """

    pass
