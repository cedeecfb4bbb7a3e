"""
Device Profile Module

Hardware abstraction for a CPU/GPU/memory SoC: discrete frequency levels,
peak-performance and bandwidth tables, voltage maps, switching latency and
thermal/activity constants. All tables are exact lookups keyed by level.
"""
import json
from dataclasses import dataclass, field, fields
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


class ProfileError(ValueError):
    """Profile parse or invariant failure; the message names the table/entry"""


class UnknownLevelError(ProfileError):
    pass


class Component(str, Enum):
    CPU = "cpu"
    GPU = "gpu"
    MEM = "mem"


@dataclass(frozen=True, order=True)
class FrequencyTriplet:
    """Coupled (f_cpu, f_gpu, f_mem) vector in Hz"""
    f_cpu: float
    f_gpu: float
    f_mem: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.f_cpu, self.f_gpu, self.f_mem))

    def get(self, component: Component) -> float:
        return {Component.CPU: self.f_cpu,
                Component.GPU: self.f_gpu,
                Component.MEM: self.f_mem}[Component(component)]

    def componentwise_max(self, other: "FrequencyTriplet") -> "FrequencyTriplet":
        return FrequencyTriplet(max(self.f_cpu, other.f_cpu),
                                max(self.f_gpu, other.f_gpu),
                                max(self.f_mem, other.f_mem))

    def replace(self, **kwargs) -> "FrequencyTriplet":
        values = {"f_cpu": self.f_cpu, "f_gpu": self.f_gpu, "f_mem": self.f_mem}
        values.update(kwargs)
        return FrequencyTriplet(**values)

    def to_dict(self) -> Dict[str, float]:
        return {"f_cpu": self.f_cpu, "f_gpu": self.f_gpu, "f_mem": self.f_mem}

    @property
    def label(self) -> str:
        return "/".join(f"{f / 1e6:g}" for f in self) + " MHz"


@dataclass(frozen=True)
class TripletGrid:
    """
    Flattened triplet grid in tie-break order (f_gpu, then f_cpu, then f_mem
    ascending) with the per-point table values as numpy arrays.
    """
    triplets: Tuple[FrequencyTriplet, ...]
    f_cpu: np.ndarray
    f_gpu: np.ndarray
    f_mem: np.ndarray
    peak: np.ndarray
    bandwidth: np.ndarray
    v_cpu: np.ndarray
    v_gpu: np.ndarray
    v_mem: np.ndarray

    def __len__(self) -> int:
        return len(self.triplets)


@dataclass(frozen=True)
class DeviceProfile:
    """
    Immutable SoC profile

    Features:
    - Level tables per component (Hz, strictly increasing)
    - Exact lookup tables for peak FLOP/s, bandwidth and voltage
    - Base switching latency with optional per-GPU-level penalty, or a full
      GPU-level transition matrix
    - Leakage, activity-factor and thermal constants
    """
    name: str
    cpu_levels: Tuple[float, ...]
    gpu_levels: Tuple[float, ...]
    mem_levels: Tuple[float, ...]
    peak_perf: Dict[Tuple[float, float], float]
    mem_bandwidth: Dict[float, float]
    voltage: Dict[Component, Dict[float, float]]
    t_overhead: float
    t_switch_base: float
    alpha_max: Dict[Component, float]
    alpha_min: Dict[Component, float]
    k1: float
    k2: float
    r_th: float
    tau_th: float
    t_ambient: float
    t_prefill: float = 0.0005
    t_switch_penalty: Dict[float, float] = field(default_factory=dict)
    t_switch_matrix: Optional[Dict[Tuple[float, float], float]] = None

    def levels(self, component: Component) -> Tuple[float, ...]:
        return {Component.CPU: self.cpu_levels,
                Component.GPU: self.gpu_levels,
                Component.MEM: self.mem_levels}[Component(component)]

    @property
    def min_triplet(self) -> FrequencyTriplet:
        return FrequencyTriplet(self.cpu_levels[0], self.gpu_levels[0], self.mem_levels[0])

    @property
    def max_triplet(self) -> FrequencyTriplet:
        return FrequencyTriplet(self.cpu_levels[-1], self.gpu_levels[-1], self.mem_levels[-1])

    def iter_triplets(self) -> Iterator[FrequencyTriplet]:
        for g in self.gpu_levels:
            for c in self.cpu_levels:
                for m in self.mem_levels:
                    yield FrequencyTriplet(c, g, m)

    @cached_property
    def grid(self) -> TripletGrid:
        triplets = tuple(self.iter_triplets())
        fc = np.array([t.f_cpu for t in triplets])
        fg = np.array([t.f_gpu for t in triplets])
        fm = np.array([t.f_mem for t in triplets])
        return TripletGrid(
            triplets=triplets,
            f_cpu=fc, f_gpu=fg, f_mem=fm,
            peak=np.array([self.peak_perf[(t.f_cpu, t.f_gpu)] for t in triplets]),
            bandwidth=np.array([self.mem_bandwidth[t.f_mem] for t in triplets]),
            v_cpu=np.array([self.voltage[Component.CPU][t.f_cpu] for t in triplets]),
            v_gpu=np.array([self.voltage[Component.GPU][t.f_gpu] for t in triplets]),
            v_mem=np.array([self.voltage[Component.MEM][t.f_mem] for t in triplets]),
        )


def _check_level(profile: DeviceProfile, component: Component, f: float):
    if f not in profile.levels(component):
        raise UnknownLevelError(
            f"{profile.name}: {f!r} Hz is not a {Component(component).value} level")


def validate_triplet(profile: DeviceProfile, triplet: FrequencyTriplet):
    for component in Component:
        _check_level(profile, component, triplet.get(component))


def peak_perf(profile: DeviceProfile, f_cpu: float, f_gpu: float) -> float:
    """Exact P_peak lookup at (f_cpu, f_gpu), FLOP/s"""
    _check_level(profile, Component.CPU, f_cpu)
    _check_level(profile, Component.GPU, f_gpu)
    return profile.peak_perf[(f_cpu, f_gpu)]


def mem_bandwidth(profile: DeviceProfile, f_mem: float) -> float:
    """Exact bandwidth lookup at f_mem, bytes/s"""
    _check_level(profile, Component.MEM, f_mem)
    return profile.mem_bandwidth[f_mem]


def voltage_of(profile: DeviceProfile, component: Component, f: float) -> float:
    component = Component(component)
    _check_level(profile, component, f)
    return profile.voltage[component][f]


def switch_latency(profile: DeviceProfile, from_triplet: FrequencyTriplet,
                   to_triplet: FrequencyTriplet) -> float:
    """
    Time for a frequency transition

    Args:
        profile: Device profile
        from_triplet: Current triplet
        to_triplet: Destination triplet

    Returns:
        0 for a no-op transition; otherwise the matrix entry for the GPU
        level pair when a matrix is present, else base plus the destination
        GPU level's penalty
    """
    validate_triplet(profile, from_triplet)
    validate_triplet(profile, to_triplet)
    if from_triplet == to_triplet:
        return 0.0
    if profile.t_switch_matrix is not None:
        return profile.t_switch_matrix[(from_triplet.f_gpu, to_triplet.f_gpu)]
    return profile.t_switch_base + profile.t_switch_penalty.get(to_triplet.f_gpu, 0.0)


# --- JSON codec -------------------------------------------------------------

def _pair_key(a: float, b: float) -> str:
    return f"{a:.0f}/{b:.0f}" if a.is_integer() and b.is_integer() else f"{a!r}/{b!r}"


def _level_key(f: float) -> str:
    return f"{f:.0f}" if float(f).is_integer() else repr(f)


def _parse_pair(key: str, table: str) -> Tuple[float, float]:
    try:
        a, b = key.split("/")
        return float(a), float(b)
    except ValueError:
        raise ProfileError(f"{table}: key '{key}' is not of the form 'f1/f2'")


def _require(data: Mapping, key: str) -> Any:
    if key not in data:
        raise ProfileError(f"profile is missing '{key}'")
    return data[key]


def _levels(data: Mapping, key: str) -> Tuple[float, ...]:
    raw = _require(data, key)
    if not isinstance(raw, list) or not raw:
        raise ProfileError(f"{key}: level table must be a nonempty list")
    levels = tuple(float(f) for f in raw)
    for i, f in enumerate(levels):
        if f <= 0:
            raise ProfileError(f"{key}[{i}]: level {f} must be positive")
        if i and f <= levels[i - 1]:
            raise ProfileError(f"{key}[{i}]: levels must be strictly increasing")
    return levels


def _level_map(raw: Any, table: str, levels: Tuple[float, ...]) -> Dict[float, float]:
    if not isinstance(raw, Mapping):
        raise ProfileError(f"{table}: expected an object keyed by level")
    parsed = {float(k): float(v) for k, v in raw.items()}
    for f in levels:
        if f not in parsed:
            raise ProfileError(f"{table}: missing entry for level {_level_key(f)}")
    return parsed


def _check_monotone(values: List[float], table: str, labels: List[str]):
    for i in range(1, len(values)):
        if values[i] < values[i - 1]:
            raise ProfileError(
                f"{table}: not non-decreasing at {labels[i]} "
                f"({values[i]} < {values[i - 1]})")


def _component_scalars(data: Mapping, key: str) -> Dict[Component, float]:
    raw = _require(data, key)
    try:
        return {c: float(raw[c.value]) for c in Component}
    except (KeyError, TypeError):
        raise ProfileError(f"{key}: needs cpu, gpu and mem entries")


def profile_from_dict(data: Mapping, source: str = "<dict>") -> DeviceProfile:
    """
    Parse and validate a profile object

    Raises:
        ProfileError naming the offending table/entry
    """
    if not isinstance(data, Mapping):
        raise ProfileError(f"{source}: profile must be a JSON object")

    cpu = _levels(data, "cpu_levels")
    gpu = _levels(data, "gpu_levels")
    mem = _levels(data, "mem_levels")

    raw_peak = _require(data, "peak_perf")
    if not isinstance(raw_peak, Mapping):
        raise ProfileError("peak_perf: expected an object keyed by 'f_cpu/f_gpu'")
    peak = {_parse_pair(k, "peak_perf"): float(v) for k, v in raw_peak.items()}
    for c in cpu:
        for g in gpu:
            value = peak.get((c, g))
            if value is None:
                raise ProfileError(f"peak_perf: missing entry {_pair_key(c, g)}")
            if value <= 0:
                raise ProfileError(f"peak_perf[{_pair_key(c, g)}] must be positive")
    for c in cpu:
        _check_monotone([peak[(c, g)] for g in gpu], "peak_perf",
                        [_pair_key(c, g) for g in gpu])
    for g in gpu:
        _check_monotone([peak[(c, g)] for c in cpu], "peak_perf",
                        [_pair_key(c, g) for c in cpu])

    bandwidth = _level_map(_require(data, "mem_bandwidth"), "mem_bandwidth", mem)
    for f in mem:
        if bandwidth[f] <= 0:
            raise ProfileError(f"mem_bandwidth[{_level_key(f)}] must be positive")
    _check_monotone([bandwidth[f] for f in mem], "mem_bandwidth",
                    [_level_key(f) for f in mem])

    raw_voltage = _require(data, "voltage")
    voltage: Dict[Component, Dict[float, float]] = {}
    for component, levels in ((Component.CPU, cpu), (Component.GPU, gpu), (Component.MEM, mem)):
        if not isinstance(raw_voltage, Mapping) or component.value not in raw_voltage:
            raise ProfileError(f"voltage: missing '{component.value}' table")
        table = f"voltage.{component.value}"
        volts = _level_map(raw_voltage[component.value], table, levels)
        for f in levels:
            if volts[f] <= 0:
                raise ProfileError(f"{table}[{_level_key(f)}] must be positive")
        _check_monotone([volts[f] for f in levels], table, [_level_key(f) for f in levels])
        voltage[component] = volts

    t_switch_base = float(_require(data, "t_switch_base"))
    if t_switch_base <= 0:
        raise ProfileError("t_switch_base must be > 0")

    penalty = {float(k): float(v) for k, v in (data.get("t_switch_penalty") or {}).items()}
    for f, value in penalty.items():
        if f not in gpu:
            raise ProfileError(f"t_switch_penalty: {_level_key(f)} is not a gpu level")
        if value <= 0:
            raise ProfileError(f"t_switch_penalty[{_level_key(f)}] must be > 0")

    matrix = None
    if data.get("t_switch_matrix") is not None:
        matrix = {_parse_pair(k, "t_switch_matrix"): float(v)
                  for k, v in data["t_switch_matrix"].items()}
        for a in gpu:
            for b in gpu:
                value = matrix.get((a, b))
                if value is None:
                    raise ProfileError(f"t_switch_matrix: missing entry {_pair_key(a, b)}")
                if value <= 0:
                    raise ProfileError(f"t_switch_matrix[{_pair_key(a, b)}] must be > 0")

    alpha_max = _component_scalars(data, "alpha_max")
    alpha_min = _component_scalars(data, "alpha_min")
    for c in Component:
        if alpha_min[c] < 0 or alpha_min[c] > alpha_max[c]:
            raise ProfileError(
                f"alpha: need 0 <= alpha_min <= alpha_max for '{c.value}'")

    k1 = float(_require(data, "k1"))
    if k1 < 0:
        raise ProfileError("k1 must be >= 0")

    t_overhead = float(_require(data, "t_overhead"))
    t_prefill = float(data.get("t_prefill", 0.0005))
    tau_th = float(_require(data, "tau_th"))
    r_th = float(_require(data, "r_th"))
    if t_overhead < 0 or t_prefill < 0:
        raise ProfileError("t_overhead and t_prefill must be >= 0")
    if tau_th <= 0 or r_th < 0:
        raise ProfileError("tau_th must be > 0 and r_th >= 0")

    return DeviceProfile(
        name=str(data.get("name") or Path(source).stem),
        cpu_levels=cpu,
        gpu_levels=gpu,
        mem_levels=mem,
        peak_perf=peak,
        mem_bandwidth=bandwidth,
        voltage=voltage,
        t_overhead=t_overhead,
        t_switch_base=t_switch_base,
        alpha_max=alpha_max,
        alpha_min=alpha_min,
        k1=k1,
        k2=float(_require(data, "k2")),
        r_th=r_th,
        tau_th=tau_th,
        t_ambient=float(_require(data, "t_ambient")),
        t_prefill=t_prefill,
        t_switch_penalty=penalty,
        t_switch_matrix=matrix,
    )


def profile_to_dict(profile: DeviceProfile) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "name": profile.name,
        "cpu_levels": list(profile.cpu_levels),
        "gpu_levels": list(profile.gpu_levels),
        "mem_levels": list(profile.mem_levels),
        "peak_perf": {_pair_key(c, g): v for (c, g), v in profile.peak_perf.items()},
        "mem_bandwidth": {_level_key(f): v for f, v in profile.mem_bandwidth.items()},
        "voltage": {c.value: {_level_key(f): v for f, v in table.items()}
                    for c, table in profile.voltage.items()},
        "t_overhead": profile.t_overhead,
        "t_switch_base": profile.t_switch_base,
        "t_switch_penalty": {_level_key(f): v for f, v in profile.t_switch_penalty.items()},
        "alpha_max": {c.value: v for c, v in profile.alpha_max.items()},
        "alpha_min": {c.value: v for c, v in profile.alpha_min.items()},
        "k1": profile.k1,
        "k2": profile.k2,
        "r_th": profile.r_th,
        "tau_th": profile.tau_th,
        "t_ambient": profile.t_ambient,
        "t_prefill": profile.t_prefill,
    }
    if profile.t_switch_matrix is not None:
        data["t_switch_matrix"] = {_pair_key(a, b): v
                                   for (a, b), v in profile.t_switch_matrix.items()}
    return data


_FIELD_NAMES = {f.name for f in fields(DeviceProfile)}


def with_overrides(profile: DeviceProfile, overrides: Mapping[str, Any]) -> DeviceProfile:
    """
    Re-validated copy with top-level profile fields replaced

    Args:
        profile: Base profile
        overrides: Field name -> value in the profile file's JSON form
    """
    if not overrides:
        return profile
    unknown = set(overrides) - _FIELD_NAMES
    if unknown:
        raise ProfileError(f"unknown profile override(s): {', '.join(sorted(unknown))}")
    data = profile_to_dict(profile)
    data.update(overrides)
    logger.debug("Applying profile overrides", profile=profile.name,
                 fields_overridden=sorted(overrides))
    return profile_from_dict(data, source=profile.name)


def load_profile(path: PathLike) -> DeviceProfile:
    """
    Load and validate a device profile

    Args:
        path: JSON profile file

    Returns:
        DeviceProfile with monotonicity invariants checked
    """
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ProfileError(f"profile file not found: {path}")
    except json.JSONDecodeError as e:
        raise ProfileError(f"{path}: invalid JSON ({e})")

    profile = profile_from_dict(data, source=str(path))
    logger.debug("Profile loaded", profile=profile.name,
                 cpu_levels=len(profile.cpu_levels),
                 gpu_levels=len(profile.gpu_levels),
                 mem_levels=len(profile.mem_levels))
    return profile
