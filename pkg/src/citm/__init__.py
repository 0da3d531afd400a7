"""Identify and validate countries in the middle (CitMs) on traceroute paths
from in-country vantage points to government websites."""

__version__ = "0.1.0"
