"""Open ASEP with time-dependent reservoirs at the quasi-static time scale."""

__version__ = "0.1.0"
