"""Facade Audit - sustainability data from building photographs."""

__version__ = "0.1.0"
