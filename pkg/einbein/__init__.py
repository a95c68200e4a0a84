"""Einbein (proper-time) thimble solver for the Helmholtz equation with a point source."""

__version__ = "0.3.0"
