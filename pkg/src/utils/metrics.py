"""
Performance Metrics Module for the SparseDVFS toolkit

Tracks per-inference latency, energy and temperature over a sustained run and
reports frame-time statistics (percentiles and jitter).
"""
import sys
import time
import numpy as np
from collections import deque
from typing import List, Dict, Optional, TextIO
from dataclasses import dataclass
import threading


@dataclass
class InferenceRecord:
    """Metrics for a single inference inside a sustained run"""
    index: int
    t_start: float
    latency_ms: float
    energy_j: float
    peak_temp: float
    throttled: bool


class PerformanceMetrics:
    """
    Tracks and analyzes per-inference metrics of a simulated run

    Monitors:
    - Frame time (end-to-end inference latency) and its jitter
    - Energy per inference
    - Peak temperature and throttled inferences
    """

    def __init__(self, max_history: int = 100000):
        """
        Initialize performance metrics tracker

        Args:
            max_history: Maximum number of inferences to keep in history
        """
        self.max_history = max_history

        self.latencies = deque(maxlen=max_history)
        self.energies = deque(maxlen=max_history)
        self.history: deque = deque(maxlen=max_history)

        self.total_runs = 0
        self.throttled_runs = 0

        self._lock = threading.Lock()

    def record_inference(self, t_start: float, latency_s: float,
                         energy_j: float, peak_temp: float,
                         throttled: bool = False):
        """
        Record one completed inference

        Args:
            t_start: Simulated start time in seconds
            latency_s: Inference latency in seconds
            energy_j: Energy consumed by the inference
            peak_temp: Highest temperature reached during the inference
            throttled: Whether any part of it ran throttled
        """
        with self._lock:
            record = InferenceRecord(
                index=self.total_runs,
                t_start=t_start,
                latency_ms=latency_s * 1000.0,
                energy_j=energy_j,
                peak_temp=peak_temp,
                throttled=throttled
            )
            self.history.append(record)
            self.latencies.append(record.latency_ms)
            self.energies.append(energy_j)

            self.total_runs += 1
            if throttled:
                self.throttled_runs += 1

    @staticmethod
    def _stats(values: List[float]) -> Dict[str, float]:
        if not values:
            return {
                'min': 0.0, 'max': 0.0, 'mean': 0.0, 'median': 0.0,
                'p50': 0.0, 'p95': 0.0, 'p99': 0.0, 'std': 0.0, 'count': 0
            }

        arr = np.array(values)
        return {
            'min': float(np.min(arr)),
            'max': float(np.max(arr)),
            'mean': float(np.mean(arr)),
            'median': float(np.median(arr)),
            'p50': float(np.percentile(arr, 50)),
            'p95': float(np.percentile(arr, 95)),
            'p99': float(np.percentile(arr, 99)),
            'std': float(np.std(arr)),
            'count': len(values)
        }

    def get_latency_stats(self) -> Dict[str, float]:
        """
        Frame-time statistics in milliseconds

        Returns:
            Dictionary with min, max, mean, median, p50, p95, p99, std
        """
        with self._lock:
            return self._stats(list(self.latencies))

    def get_energy_stats(self) -> Dict[str, float]:
        """Per-inference energy statistics in joules"""
        with self._lock:
            return self._stats(list(self.energies))

    def get_jitter_ms(self) -> float:
        """Standard deviation of frame time"""
        return self.get_latency_stats()['std']

    def get_throttled_fraction(self) -> float:
        with self._lock:
            if self.total_runs == 0:
                return 0.0
            return self.throttled_runs / self.total_runs

    def get_recent(self, last_n: int = 10) -> List[InferenceRecord]:
        with self._lock:
            return list(self.history)[-last_n:]

    def get_summary(self) -> Dict[str, object]:
        """
        Get comprehensive run summary

        Returns:
            Dictionary with counts, frame-time and energy statistics
        """
        return {
            'inferences': self.total_runs,
            'throttled_inferences': self.throttled_runs,
            'throttled_fraction': self.get_throttled_fraction(),
            'frame_time_ms': self.get_latency_stats(),
            'energy_j': self.get_energy_stats(),
            'jitter_ms': self.get_jitter_ms()
        }

    def print_summary(self, stream: TextIO = sys.stderr):
        """Print formatted run summary"""
        summary = self.get_summary()
        frame = summary['frame_time_ms']

        print("\n" + "=" * 60, file=stream)
        print("SUSTAINED RUN SUMMARY", file=stream)
        print("=" * 60, file=stream)
        print(f"\nInferences: {summary['inferences']} total, "
              f"{summary['throttled_inferences']} throttled", file=stream)

        print("\nFrame time (ms):", file=stream)
        print("-" * 60, file=stream)
        print(f"  Mean:   {frame['mean']:.2f}ms", file=stream)
        print(f"  Median: {frame['median']:.2f}ms", file=stream)
        print(f"  P95:    {frame['p95']:.2f}ms", file=stream)
        print(f"  P99:    {frame['p99']:.2f}ms", file=stream)
        print(f"  Jitter: {summary['jitter_ms']:.3f}ms", file=stream)

        print(f"\nEnergy/inference: {summary['energy_j']['mean']:.4f}J", file=stream)
        print("\n" + "=" * 60 + "\n", file=stream)

    def reset(self):
        """Reset all metrics"""
        with self._lock:
            self.latencies.clear()
            self.energies.clear()
            self.history.clear()
            self.total_runs = 0
            self.throttled_runs = 0


class LatencyTimer:
    """
    Context manager for timing operations

    Usage:
        with LatencyTimer() as timer:
            run_something()
        logger.log_performance("run", timer.elapsed_ms)
    """

    def __init__(self):
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None
        self.elapsed_ms: float = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = time.perf_counter()
        self.elapsed_ms = (self.end_time - self.start_time) * 1000
