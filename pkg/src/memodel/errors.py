"""Exceptions shared by the engines and the harness."""


class ExecutionError(Exception):
    """A program did something the model forbids at run time, e.g. an address
    expression resolved outside the declared locations."""


class ResourceLimitError(Exception):
    """A search exceeded its configured step/state/event bound.

    Always reported explicitly; results are never silently truncated."""


class EngineConfigError(Exception):
    """The selected engine cannot run under the given model configuration."""
