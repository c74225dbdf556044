"""Exception types shared across the simulator and learner."""


class SimulationError(Exception):
    """Base class for everything raised by this package on purpose."""


class PlacementFailure(SimulationError):
    """Topology rejection sampling ran out of attempts."""


class DomainError(SimulationError):
    """An input left its documented domain (negative power, zero gain, ...)."""


class ShapeMismatch(SimulationError):
    """Array shapes disagree with the declared network dimensions."""


class LengthMismatch(SimulationError):
    """Sequence lengths disagree (e.g. values vs rewards in GAE)."""


class StaleCache(SimulationError):
    """A backward pass was handed a cache from a different forward pass."""


class BudgetExceeded(SimulationError):
    """A guarded exhaustive computation would exceed its size budget."""


class EmptyInput(SimulationError):
    """A statistic was requested over an empty collection."""


class EmptyEpisode(SimulationError):
    """No pair completed a packet, so the delay average is undefined."""


class DivergenceDetected(SimulationError):
    """A training loss became non-finite."""


class ConfigError(SimulationError):
    """Config file could not be parsed or validated."""


class NonConvergenceWarning(UserWarning):
    """An iterative solver stopped at max iterations above tolerance."""
