"""
Unified Co-Governor Module

Turns a block schedule into an executable frequency plan and emulates the
baseline governors:

- race-to-submit: CPU pinned to its top level for a short prefill window at
  each block start, then back to the block's level
- memory coordination: EMC level chosen per block from its compute/memory
  balance
- pipelined look-ahead: the next block's switch is issued `lead` seconds
  before the current block ends so its latency overlaps execution
- reactive default governor: per-component utilization thresholds
- first-order thermal model and throttling with hysteresis
"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional

from device import Component, DeviceProfile, FrequencyTriplet, peak_perf, switch_latency
from graph import Operator
from modeler import Bound, block_exec_time, predict_exec_time
from partitioner import Schedule, SuperBlock
from utils.logger import get_logger

logger = get_logger(__name__)

THROTTLE_HYSTERESIS = 5.0


class PolicyKind(str, Enum):
    SPARSE_DVFS_LOOKAHEAD = "sparse_dvfs_lookahead"
    SPARSE_DVFS_SERIAL = "sparse_dvfs_serial"
    MAX_STATIC = "max_static"
    MODEL_LEVEL_STATIC = "model_level_static"
    OPERATOR_LEVEL_SERIAL = "operator_level_serial"
    REACTIVE_DEFAULT = "reactive_default"


@dataclass(frozen=True)
class ReactiveParams:
    """Threshold governor emulation (schedutil / devfreq style)"""
    up_threshold: float = 0.8       # step up when utilization exceeds this
    down_threshold: float = 0.3     # step down below this
    sampling_period: float = 0.010  # seconds between decisions

    def __post_init__(self):
        if not 0.0 <= self.down_threshold < self.up_threshold <= 1.0:
            raise ValueError("reactive thresholds need 0 <= down < up <= 1")
        if self.sampling_period <= 0:
            raise ValueError("sampling_period must be > 0")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ReactiveParams":
        defaults = cls()
        return cls(
            up_threshold=float(data.get("up_threshold", defaults.up_threshold)),
            down_threshold=float(data.get("down_threshold", defaults.down_threshold)),
            sampling_period=float(data.get("sampling_period", defaults.sampling_period)),
        )


@dataclass(frozen=True)
class GovernorPolicy:
    """
    Policy selection and knobs

    lead: look-ahead lead time in seconds; None issues the next switch at the
        start of the current block (full overlap)
    race_to_submit / memory_coordination: SparseDVFS ablation switches
    """
    kind: PolicyKind
    lead: Optional[float] = None
    race_to_submit: bool = True
    memory_coordination: bool = True
    reactive: ReactiveParams = field(default_factory=ReactiveParams)

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.lead is not None and self.lead < 0:
            raise ValueError("lead must be >= 0")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def effective_lead(self) -> float:
        """Lead actually used when executing the plan"""
        if self.kind is PolicyKind.SPARSE_DVFS_LOOKAHEAD:
            return math.inf if self.lead is None else self.lead
        return 0.0

    @classmethod
    def from_dict(cls, data: Mapping) -> "GovernorPolicy":
        return cls(
            kind=PolicyKind(data["kind"]),
            lead=data.get("lead"),
            race_to_submit=bool(data.get("race_to_submit", True)),
            memory_coordination=bool(data.get("memory_coordination", True)),
            reactive=ReactiveParams.from_dict(data.get("reactive", {})),
        )

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "lead": self.lead,
            "race_to_submit": self.race_to_submit,
            "memory_coordination": self.memory_coordination,
            "reactive": {
                "up_threshold": self.reactive.up_threshold,
                "down_threshold": self.reactive.down_threshold,
                "sampling_period": self.reactive.sampling_period,
            },
        }


@dataclass(frozen=True)
class ThermalState:
    temp: float
    r_th: float
    tau_th: float
    t_ambient: float

    @classmethod
    def from_profile(cls, profile: DeviceProfile,
                     temp: Optional[float] = None) -> "ThermalState":
        return cls(temp=profile.t_ambient if temp is None else temp,
                   r_th=profile.r_th, tau_th=profile.tau_th,
                   t_ambient=profile.t_ambient)


@dataclass(frozen=True)
class BoostWindow:
    block_index: int
    t_offset: float      # from schedule start, ignoring stalls
    duration: float
    triplet: FrequencyTriplet


@dataclass(frozen=True)
class FusePlan:
    """Schedule annotated with per-block CPU boost windows"""
    schedule: Schedule
    windows: List[BoostWindow]

    def window_for(self, block_index: int) -> Optional[BoostWindow]:
        for window in self.windows:
            if window.block_index == block_index:
                return window
        return None


@dataclass(frozen=True)
class SwitchCommand:
    to_block: int
    issue_time: float
    complete_time: float
    latency: float
    stall: float


@dataclass(frozen=True)
class LookaheadPlan:
    lead: float
    commands: List[SwitchCommand]
    block_starts: List[float]
    makespan: float

    @property
    def total_stall(self) -> float:
        return sum(c.stall for c in self.commands)


def plan_fuse(schedule: Schedule, profile: DeviceProfile) -> FusePlan:
    """
    Race-to-submit annotation

    Each block gets a window of min(t_prefill, t_block) at its start during
    which the CPU runs at its top level with the block's GPU/memory levels.

    Args:
        schedule: Block schedule
        profile: Device profile (t_prefill, CPU levels)

    Returns:
        FusePlan; no windows when t_prefill is 0
    """
    windows: List[BoostWindow] = []
    if profile.t_prefill > 0:
        offset = 0.0
        for index, block in enumerate(schedule.blocks):
            windows.append(BoostWindow(
                block_index=index,
                t_offset=offset,
                duration=min(profile.t_prefill, block.t_block),
                triplet=block.f_block.replace(f_cpu=profile.cpu_levels[-1]),
            ))
            offset += block.t_block
    return FusePlan(schedule=schedule, windows=windows)


def _aggregate_terms(ops, f: FrequencyTriplet, profile: DeviceProfile):
    t_compute = t_memory = 0.0
    for op in ops:
        estimate = predict_exec_time(op, f, profile)
        t_compute += estimate.t_compute
        t_memory += estimate.t_memory
    return t_compute, t_memory


def coordinate_memory(block: SuperBlock, profile: DeviceProfile) -> FrequencyTriplet:
    """
    EMC level for a block from its compute/memory balance

    The block is classified by its summed compute and memory terms at f_block
    (ties count as memory-bound). Compute-bound blocks get the lowest memory
    level that does not lengthen the block. Memory-bound blocks get the top
    memory level and the lowest GPU level that does not lengthen the block
    relative to (f_gpu, top memory level). Lengthening is judged on the
    summed per-operator times, so t_block never grows.

    Args:
        block: Super-block
        profile: Device profile

    Returns:
        Adjusted triplet
    """
    f = block.f_block
    t_compute, t_memory = _aggregate_terms(block.ops, f, profile)
    t_reference = block_exec_time(block.ops, f, profile)

    if t_memory >= t_compute:
        top = f.replace(f_mem=profile.mem_levels[-1])
        t_reference = block_exec_time(block.ops, top, profile)
        chosen = top
        for g in profile.gpu_levels:
            if g > f.f_gpu:
                break
            candidate = top.replace(f_gpu=g)
            if block_exec_time(block.ops, candidate, profile) <= t_reference:
                chosen = candidate
                break
    else:
        chosen = f
        for m in profile.mem_levels:
            if m > f.f_mem:
                break
            candidate = f.replace(f_mem=m)
            if block_exec_time(block.ops, candidate, profile) <= t_reference:
                chosen = candidate
                break

    if chosen != f:
        logger.debug("Memory coordination adjusted block",
                     bound=Bound.MEMORY.value if t_memory >= t_compute else Bound.COMPUTE.value,
                     before=f.label, after=chosen.label)
    return chosen


def residual_stall(latency: float, prev_block_time: float, lead: float) -> float:
    """Part of a switch latency not hidden behind the preceding block"""
    overlap = min(lead, prev_block_time)
    return max(0.0, latency - overlap)


def plan_lookahead(schedule: Schedule, profile: DeviceProfile,
                   lead: Optional[float] = None) -> LookaheadPlan:
    """
    Pipelined switch plan

    The switch into block i+1 is issued at max(start_i, end_i - lead) and
    completes after switch_latency; whatever remains past end_i is a stall.
    lead=0 is serial switching. The device starts at the first block's
    triplet, so there is no initial switch.

    Args:
        schedule: Block schedule
        profile: Device profile
        lead: Seconds before block end; None means the whole block

    Returns:
        LookaheadPlan with issue/complete times and per-switch stalls
    """
    lead = math.inf if lead is None else lead
    if lead < 0:
        raise ValueError("lead must be >= 0")

    commands: List[SwitchCommand] = []
    starts: List[float] = []
    t = 0.0
    blocks = schedule.blocks
    for index, block in enumerate(blocks):
        starts.append(t)
        end = t + block.t_block
        if index + 1 < len(blocks):
            latency = switch_latency(profile, block.f_block, blocks[index + 1].f_block)
            issue = max(t, end - lead)
            stall = residual_stall(latency, block.t_block, lead)
            commands.append(SwitchCommand(
                to_block=index + 1, issue_time=issue,
                complete_time=issue + latency, latency=latency, stall=stall))
            t = end + stall
        else:
            t = end

    return LookaheadPlan(lead=lead, commands=commands, block_starts=starts, makespan=t)


def component_utilization(op: Operator, f: FrequencyTriplet,
                          profile: DeviceProfile) -> Dict[Component, float]:
    """
    Utilization proxy a load-tracking governor would observe

    GPU busy share is the compute term's share of the operator time, scaled
    by how far the CPU clock caps the achievable peak; CPU share the same,
    scaled by the GPU's position; memory share is the memory term's share.
    """
    estimate = predict_exec_time(op, f, profile)
    dominant = max(estimate.t_compute, estimate.t_memory)
    if dominant == 0.0:
        return {Component.CPU: 0.0, Component.GPU: 0.0, Component.MEM: 0.0}

    compute_share = estimate.t_compute / dominant
    current = peak_perf(profile, f.f_cpu, f.f_gpu)
    return {
        Component.CPU: compute_share * current / peak_perf(profile, f.f_cpu, profile.gpu_levels[-1]),
        Component.GPU: compute_share * current / peak_perf(profile, profile.cpu_levels[-1], f.f_gpu),
        Component.MEM: estimate.t_memory / dominant,
    }


def reactive_step(utilization: Mapping[Component, float], current: FrequencyTriplet,
                  params: ReactiveParams, profile: DeviceProfile) -> FrequencyTriplet:
    """
    One decision of the threshold governor

    Each component independently steps one level up above up_threshold, one
    level down below down_threshold, and holds otherwise; levels clamp at
    the table ends.
    """
    stepped = {}
    for component in Component:
        u = utilization[component]
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"{component.value} utilization {u} outside [0, 1]")
        levels = profile.levels(component)
        index = levels.index(current.get(component))
        if u > params.up_threshold:
            index = min(index + 1, len(levels) - 1)
        elif u < params.down_threshold:
            index = max(index - 1, 0)
        stepped[component] = levels[index]
    return FrequencyTriplet(stepped[Component.CPU], stepped[Component.GPU],
                            stepped[Component.MEM])


def thermal_update(state: ThermalState, p_total: float, dt: float) -> ThermalState:
    """
    First-order RC step toward t_ambient + r_th * p_total

    Args:
        state: Current thermal state
        p_total: Constant power over the step, W
        dt: Step length, s (> 0)
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    decay = math.exp(-dt / state.tau_th)
    temp = (state.t_ambient + (state.temp - state.t_ambient) * decay
            + state.r_th * p_total * (1.0 - decay))
    return replace(state, temp=temp)


def throttle_check(state: ThermalState, profile: DeviceProfile, limit: float,
                   engaged: bool = False,
                   hysteresis: float = THROTTLE_HYSTERESIS) -> Optional[FrequencyTriplet]:
    """
    Forced triplet while the die is too hot

    Engages at temp >= limit; once engaged it holds until temp drops below
    limit - hysteresis.

    Returns:
        The minimum triplet when throttling, else None

    Raises:
        ValueError: limit is not above the ambient temperature
    """
    _check_limit(limit, state.t_ambient)
    threshold = limit - hysteresis if engaged else limit
    if state.temp >= threshold:
        return profile.min_triplet
    return None


def _check_limit(limit: float, t_ambient: float):
    if not limit > t_ambient:
        raise ValueError(f"throttle limit {limit} C must be above ambient {t_ambient} C")


class ThermalThrottle:
    """Throttle state carried across consecutive events"""

    def __init__(self, profile: DeviceProfile, limit: Optional[float],
                 hysteresis: float = THROTTLE_HYSTERESIS):
        if limit is not None:
            _check_limit(limit, profile.t_ambient)
        self.profile = profile
        self.limit = limit
        self.hysteresis = hysteresis
        self.engaged = False
        self.onset: Optional[float] = None

    def check(self, state: ThermalState, t: float) -> Optional[FrequencyTriplet]:
        if self.limit is None:
            return None
        forced = throttle_check(state, self.profile, self.limit,
                                self.engaged, self.hysteresis)
        if (forced is not None) != self.engaged:
            self.engaged = forced is not None
            if self.engaged and self.onset is None:
                self.onset = t
            logger.log_throttle(state.temp, self.limit, t, self.engaged)
        return forced
