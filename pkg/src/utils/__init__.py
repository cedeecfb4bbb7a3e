"""
Utils package for the SparseDVFS toolkit
"""
from .logger import StructuredLogger, get_logger, setup_app_logging
from .metrics import PerformanceMetrics, LatencyTimer

__all__ = ['StructuredLogger', 'get_logger', 'setup_app_logging',
           'PerformanceMetrics', 'LatencyTimer']
