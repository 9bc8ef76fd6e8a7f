"""Engine exception hierarchy."""


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid or unknown configuration content."""


class InitError(EngineError):
    """Plasma initialization failed (e.g. allocation over the memory cap)."""


class ContractViolation(EngineError):
    """An operation was called with inputs violating its preconditions."""


class CflViolation(EngineError):
    """A particle moved too far in one step for the grid to track it."""


class SchedulerError(EngineError):
    """Task runtime misuse (submit after shutdown, unmatched region exit, ...)."""
