class ShrinkSGDError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ShrinkSGDError, ValueError):
    """Invalid experiment or learner configuration."""


class StreamExhausted(ShrinkSGDError):
    """A data stream ran out before the requested horizon."""


class InvariantViolation(ShrinkSGDError, AssertionError):
    """A runtime invariant of the learner was breached (a bug signal)."""
