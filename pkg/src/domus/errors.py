"""Shared exception base for the domus toolkit."""


class DomusError(Exception):
    """Base class for all domain errors raised by this package."""
