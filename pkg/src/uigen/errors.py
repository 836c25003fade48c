"""Shared error base so the refinement loop can fail a session on any stage error."""


class EngineError(Exception):
    """Base class for engine-stage failures that should fail a session, not crash it."""


class InvalidConfigError(EngineError, ValueError):
    """A configuration value is outside its allowed bounds."""
