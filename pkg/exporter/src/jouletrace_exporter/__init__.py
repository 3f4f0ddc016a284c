"""Offline converters from profiler output to canonical trace formats."""

from .powerlog import PowerLogSummary, convert_power_log
from .timeline import ConversionError, TimelineSummary, convert_timeline

__version__ = "0.1.0"
