"""
Event-Driven Simulator Module

Replays a governor policy over a graph on a device profile and records an
ExecutionTrace: block executions, CPU boost windows, switch stalls and
throttled execution, each with its mean power and the temperature reached.
All reported metrics derive from the trace.

Also loads scenario files and computes the comparison metrics (energy
efficiency gain, cost-gain ratio) and N sweeps.
"""
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from device import DeviceProfile, FrequencyTriplet, load_profile, switch_latency, with_overrides
from governor import (GovernorPolicy, PolicyKind, ReactiveParams, ThermalState,
                      ThermalThrottle, component_utilization, coordinate_memory,
                      plan_fuse, reactive_step, residual_stall, thermal_update)
from graph import (ComputationGraph, Operator, SparsityTrace, apply_trace,
                   load_graph, load_trace, topo_order)
from modeler import optimal_block_triplet, predict_exec_time, predict_power
from partitioner import (PartitionConfig, Schedule, SuperBlock, make_block,
                         operator_level_schedule, partition)
from utils.logger import get_logger
from utils.metrics import PerformanceMetrics

logger = get_logger(__name__)

PathLike = Union[str, Path]

SPARSE_DVFS_KINDS = (PolicyKind.SPARSE_DVFS_LOOKAHEAD, PolicyKind.SPARSE_DVFS_SERIAL)

# label -> (race_to_submit, memory_coordination)
ABLATION_VARIANTS = {
    "gpu_only": (False, False),
    "cpu_lock": (True, False),
    "fuse": (True, True),
}


class SimulationError(ValueError):
    pass


class ZeroBaselineEnergyError(SimulationError):
    pass


class NonPositiveGainError(SimulationError):
    pass


class ScenarioError(ValueError):
    pass


class EventKind(str, Enum):
    BLOCK_EXEC = "block_exec"
    SWITCH_STALL = "switch_stall"
    CPU_BOOST = "cpu_boost"
    THROTTLE = "throttle"


@dataclass(frozen=True)
class TimelineEvent:
    t_start: float
    t_end: float
    kind: EventKind
    triplet: FrequencyTriplet
    power: float            # mean over the event, W
    temp_start: float
    temp_end: float
    block_index: Optional[int] = None

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def energy(self) -> float:
        return self.power * self.duration

    def to_dict(self) -> Dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "kind": self.kind.value,
            **self.triplet.to_dict(),
            "power": self.power,
            "temp_start": self.temp_start,
            "temp_end": self.temp_end,
            "block_index": self.block_index,
        }


@dataclass
class ExecutionTrace:
    """
    Time-ordered record of one simulated run

    Totals are accumulated while events are appended; they equal the
    integrals over `events`.
    """
    policy: str
    graph_name: str
    events: List[TimelineEvent] = field(default_factory=list)
    makespan: float = 0.0
    total_energy: float = 0.0
    total_switch_stall: float = 0.0
    peak_temp: float = -math.inf
    block_energies: Dict[int, float] = field(default_factory=dict)
    block_count: int = 0
    sample_index: Optional[int] = None
    throttle_onset: Optional[float] = None

    @property
    def mean_power(self) -> float:
        return self.total_energy / self.makespan if self.makespan > 0 else 0.0

    @property
    def peak_power(self) -> float:
        return max((e.power for e in self.events), default=0.0)

    @property
    def final_temp(self) -> float:
        return self.events[-1].temp_end if self.events else self.peak_temp

    def summary(self) -> Dict:
        return {
            "policy": self.policy,
            "graph": self.graph_name,
            "sample_index": self.sample_index,
            "makespan_s": self.makespan,
            "energy_j": self.total_energy,
            "mean_power_w": self.mean_power,
            "peak_power_w": self.peak_power,
            "switch_stall_s": self.total_switch_stall,
            "block_count": self.block_count,
            "peak_temp_c": self.peak_temp,
            "throttle_onset_s": self.throttle_onset,
        }

    def to_dict(self) -> Dict:
        return {
            "summary": self.summary(),
            "block_energies": {str(k): v for k, v in sorted(self.block_energies.items())},
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def concatenate(cls, traces: Sequence["ExecutionTrace"]) -> "ExecutionTrace":
        """Back-to-back combination of per-sample traces"""
        if not traces:
            raise SimulationError("nothing to concatenate")
        combined = cls(policy=traces[0].policy, graph_name=traces[0].graph_name)
        offset = 0.0
        for trace in traces:
            for event in trace.events:
                combined.events.append(replace(event, t_start=event.t_start + offset,
                                               t_end=event.t_end + offset))
            if combined.throttle_onset is None and trace.throttle_onset is not None:
                combined.throttle_onset = trace.throttle_onset + offset
            # block indices continue across samples
            for index, energy in trace.block_energies.items():
                combined.block_energies[index + combined.block_count] = energy
            offset += trace.makespan
            combined.total_energy += trace.total_energy
            combined.total_switch_stall += trace.total_switch_stall
            combined.peak_temp = max(combined.peak_temp, trace.peak_temp)
            combined.block_count += trace.block_count
        combined.makespan = offset
        return combined


@dataclass(frozen=True)
class SweepRow:
    n_factor: float
    block_count: int
    makespan: float
    switch_stall: float
    energy: float
    mean_power: float

    def to_dict(self) -> Dict:
        return {
            "n": "inf" if math.isinf(self.n_factor) else self.n_factor,
            "block_count": self.block_count,
            "makespan_s": self.makespan,
            "switch_stall_s": self.switch_stall,
            "energy_j": self.energy,
            "mean_power_w": self.mean_power,
        }


@dataclass
class SustainedReport:
    trace: ExecutionTrace
    inferences: int
    metrics: PerformanceMetrics

    @property
    def throttle_onset(self) -> Optional[float]:
        return self.trace.throttle_onset

    def to_dict(self) -> Dict:
        return {
            "summary": self.trace.summary(),
            "inferences": self.inferences,
            "frames": self.metrics.get_summary(),
        }


# --- execution engine -------------------------------------------------------

class _Executor:
    """
    Advances simulated time, temperature and the device triplet event by
    event, appending to one ExecutionTrace.
    """

    def __init__(self, profile: DeviceProfile, trace: ExecutionTrace,
                 thermal_init: ThermalState, thermal_tick: Optional[float] = None,
                 throttle_limit: Optional[float] = None):
        if thermal_tick is not None and thermal_tick <= 0:
            raise SimulationError("thermal tick must be > 0")
        self.profile = profile
        self.trace = trace
        self.state = thermal_init
        self.tick = thermal_tick
        self.throttle = ThermalThrottle(profile, throttle_limit)
        self.t = 0.0
        self.device: Optional[FrequencyTriplet] = None
        self.device_forced = False
        self.prev_duration = 0.0
        self.trace.peak_temp = max(self.trace.peak_temp, thermal_init.temp)

    def emit(self, kind: EventKind, duration: float, triplet: FrequencyTriplet,
             power_at: Callable[[float], float], block_index: Optional[int] = None):
        if duration <= 0.0:
            return
        temp_start = self.state.temp
        peak = temp_start
        if self.tick is None:
            power = power_at(temp_start)
            self.state = thermal_update(self.state, power, duration)
            energy = power * duration
            peak = max(peak, self.state.temp)
        else:
            steps = max(1, math.ceil(duration / self.tick))
            dt = duration / steps
            energy = 0.0
            for _ in range(steps):
                p = power_at(self.state.temp)
                energy += p * dt
                self.state = thermal_update(self.state, p, dt)
                peak = max(peak, self.state.temp)
            power = energy / duration

        event = TimelineEvent(t_start=self.t, t_end=self.t + duration, kind=kind,
                              triplet=triplet, power=power, temp_start=temp_start,
                              temp_end=self.state.temp, block_index=block_index)
        self.t = event.t_end
        trace = self.trace
        trace.events.append(event)
        trace.makespan = self.t
        trace.total_energy += energy
        trace.peak_temp = max(trace.peak_temp, peak)
        if kind is EventKind.SWITCH_STALL:
            trace.total_switch_stall += duration
        elif block_index is not None:
            trace.block_energies[block_index] = trace.block_energies.get(block_index, 0.0) + energy

    def _stall_power(self, target: FrequencyTriplet) -> Callable[[float], float]:
        return lambda temp: predict_power(target, temp, 1.0, self.profile).p_total

    def _mean_power(self, ops: Sequence[Operator], f_power: FrequencyTriplet,
                    weights: Sequence[float]) -> Callable[[float], float]:
        total = sum(weights)

        def power_at(temp: float) -> float:
            return sum(predict_power(f_power, temp, op.s_comp, self.profile).p_total * w
                       for op, w in zip(ops, weights)) / total
        return power_at

    def check_throttle(self) -> Optional[FrequencyTriplet]:
        forced = self.throttle.check(self.state, self.t)
        if self.throttle.onset is not None and self.trace.throttle_onset is None:
            self.trace.throttle_onset = self.throttle.onset
        return forced

    def run_schedule(self, schedule: Schedule, lead: float, boost: bool,
                     index_offset: int = 0):
        """
        Execute blocks in order

        Switch latency into each block overlaps the previous block by up to
        `lead` seconds; the remainder stalls. Entering or leaving the forced
        throttle triplet is not charged.
        """
        fuse = plan_fuse(schedule, self.profile) if boost else None
        for index, block in enumerate(schedule.blocks):
            block_index = index + index_offset
            forced = self.check_throttle()
            if forced is not None:
                weights = [predict_exec_time(op, forced, self.profile).t_exe for op in block.ops]
                self.emit(EventKind.THROTTLE, sum(weights), forced,
                          self._mean_power(block.ops, forced, weights), block_index)
                self.device, self.device_forced = forced, True
                self.prev_duration = sum(weights)
                continue

            target = block.f_block
            if self.device is not None and not self.device_forced and self.device != target:
                latency = switch_latency(self.profile, self.device, target)
                stall = residual_stall(latency, self.prev_duration, lead)
                self.emit(EventKind.SWITCH_STALL, stall, target,
                          self._stall_power(target), block_index)

            weights = [predict_exec_time(op, target, self.profile).t_exe for op in block.ops]
            window = fuse.window_for(index) if fuse is not None else None
            remaining = block.t_block
            if window is not None:
                self.emit(EventKind.CPU_BOOST, window.duration, window.triplet,
                          self._mean_power(block.ops, window.triplet, weights), block_index)
                remaining = block.t_block - window.duration
            self.emit(EventKind.BLOCK_EXEC, remaining, target,
                      self._mean_power(block.ops, target, weights), block_index)

            self.device, self.device_forced = target, False
            self.prev_duration = block.t_block

    def run_reactive(self, ops: Sequence[Operator], params: ReactiveParams,
                     index_offset: int = 0):
        """
        Threshold governor: operators run at the current triplet and are split
        at sampling instants; each sample may step components and charges a
        full (serial) switch latency on any change.
        """
        profile = self.profile
        if self.device is None or self.device_forced:
            self.device, self.device_forced = profile.min_triplet, False
        next_sample = self.t + params.sampling_period

        for index, op in enumerate(ops):
            block_index = index + index_offset
            remaining = 1.0
            while remaining > 1e-12:
                forced = self.check_throttle()
                f = forced if forced is not None else self.device
                kind = EventKind.THROTTLE if forced is not None else EventKind.BLOCK_EXEC
                t_op = predict_exec_time(op, f, profile).t_exe
                power_at = self._mean_power([op], f, [1.0])

                finish = remaining * t_op
                if self.t + finish <= next_sample:
                    self.emit(kind, finish, f, power_at, block_index)
                    break

                run = next_sample - self.t
                if run > 0:
                    self.emit(kind, run, f, power_at, block_index)
                    remaining -= run / t_op

                if forced is None:
                    target = reactive_step(component_utilization(op, f, profile), f,
                                           params, profile)
                    latency = switch_latency(profile, f, target)
                    self.emit(EventKind.SWITCH_STALL, latency, target,
                              self._stall_power(target), block_index)
                    self.device = target
                next_sample = self.t + params.sampling_period


def _per_op_schedule(graph: ComputationGraph, f: FrequencyTriplet,
                     profile: DeviceProfile) -> Schedule:
    blocks = tuple(make_block([op], f, profile) for op in topo_order(graph))
    return Schedule(blocks=blocks, graph_name=graph.name)


def fuse_block(block: SuperBlock, policy: GovernorPolicy,
               profile: DeviceProfile) -> SuperBlock:
    """
    Block as the co-governor runs it under the ablation switches

    Without memory coordination the EMC is left at its top level; with it,
    coordinate_memory scales the EMC from there. Without race-to-submit the
    CPU is not held by the co-governor and idles at its bottom level while
    the GPU works, which caps the GPU peak wherever the CPU roof binds.
    """
    f = block.f_block.replace(f_mem=profile.mem_levels[-1])
    if policy.memory_coordination:
        f = coordinate_memory(make_block(block.ops, f, profile), profile)
    if not policy.race_to_submit:
        f = f.replace(f_cpu=profile.cpu_levels[0])
    if f == block.f_block:
        return block
    return make_block(block.ops, f, profile, block.member_optima)


def plan_schedule(graph: ComputationGraph, profile: DeviceProfile,
                  policy: GovernorPolicy, cfg: PartitionConfig,
                  temp: float) -> Schedule:
    """
    Block schedule a policy executes

    SparseDVFS policies partition the graph and apply the ablation switches
    per block; static and per-operator baselines use one block per operator.
    The model-level baseline applies the per-operator latency budget to the
    summed time, scaled by the operator count.
    """
    kind = policy.kind
    if kind in SPARSE_DVFS_KINDS:
        schedule = partition(graph, profile, cfg, temp)
        blocks = tuple(fuse_block(b, policy, profile) for b in schedule.blocks)
        return replace(schedule, blocks=blocks)
    if kind is PolicyKind.MAX_STATIC:
        return _per_op_schedule(graph, profile.max_triplet, profile)
    if kind is PolicyKind.MODEL_LEVEL_STATIC:
        ops = topo_order(graph)
        budget = None if cfg.latency_budget is None else cfg.latency_budget * len(ops)
        f = optimal_block_triplet(ops, temp, profile, budget)
        return _per_op_schedule(graph, f, profile)
    if kind is PolicyKind.OPERATOR_LEVEL_SERIAL:
        return operator_level_schedule(graph, profile, cfg, temp)
    raise SimulationError(f"policy '{kind.value}' has no block schedule")


def _run_on(executor: _Executor, graph: ComputationGraph, policy: GovernorPolicy,
            schedule: Optional[Schedule], index_offset: int = 0):
    if policy.kind is PolicyKind.REACTIVE_DEFAULT:
        executor.run_reactive(topo_order(graph), policy.reactive, index_offset)
    else:
        boost = policy.kind in SPARSE_DVFS_KINDS and policy.race_to_submit
        executor.run_schedule(schedule, policy.effective_lead, boost, index_offset)


def _rebind(schedule: Schedule, graph: ComputationGraph,
            profile: DeviceProfile) -> Schedule:
    """Keep block boundaries and triplets, take operators from `graph`"""
    by_id = {op.id: op for op in graph.operators}
    blocks = tuple(make_block([by_id[op.id] for op in b.ops], b.f_block, profile,
                              b.member_optima)
                   for b in schedule.blocks)
    return replace(schedule, blocks=blocks)


def run_policy(graph: ComputationGraph, profile: DeviceProfile,
               policy: GovernorPolicy, cfg: PartitionConfig,
               thermal_init: ThermalState, *,
               schedule: Optional[Schedule] = None,
               thermal_tick: Optional[float] = None,
               throttle_limit: Optional[float] = None,
               sample_index: Optional[int] = None) -> ExecutionTrace:
    """
    Simulate one inference under a policy

    Args:
        graph: Graph (sparsity already applied)
        profile: Device profile
        policy: Governor policy
        cfg: Partition configuration
        thermal_init: Initial thermal state; partitioning uses its temperature
        schedule: Precomputed schedule (amortized mode); planned when None
        thermal_tick: Optional tick length for intra-event thermal updates
        throttle_limit: Optional throttle temperature

    Returns:
        ExecutionTrace
    """
    trace = ExecutionTrace(policy=policy.name, graph_name=graph.name,
                           sample_index=sample_index)
    if policy.kind is not PolicyKind.REACTIVE_DEFAULT and schedule is None:
        schedule = plan_schedule(graph, profile, policy, cfg, thermal_init.temp)
    trace.block_count = len(graph) if schedule is None else len(schedule)

    executor = _Executor(profile, trace, thermal_init, thermal_tick, throttle_limit)
    _run_on(executor, graph, policy, schedule)

    logger.log_simulation(policy.name, graph.name, trace.makespan, trace.total_energy,
                          trace.total_switch_stall, blocks=trace.block_count,
                          peak_temp=trace.peak_temp)
    return trace


def simulate(graph: ComputationGraph, profile: DeviceProfile, policy: GovernorPolicy,
             cfg: PartitionConfig, thermal_init: ThermalState,
             samples: Optional[SparsityTrace] = None, *,
             amortized: bool = False,
             thermal_tick: Optional[float] = None,
             throttle_limit: Optional[float] = None) -> List[ExecutionTrace]:
    """
    One ExecutionTrace per input sample (a single trace without samples)

    By default every sample is re-partitioned with its own sparsity; with
    `amortized` the schedule is planned once on the static graph and only
    operator times follow the samples.
    """
    if samples is None:
        return [run_policy(graph, profile, policy, cfg, thermal_init,
                           thermal_tick=thermal_tick, throttle_limit=throttle_limit)]

    shared = None
    if amortized and policy.kind is not PolicyKind.REACTIVE_DEFAULT:
        shared = plan_schedule(graph, profile, policy, cfg, thermal_init.temp)

    traces = []
    for index in range(len(samples)):
        sample_graph = apply_trace(graph, samples, index)
        schedule = _rebind(shared, sample_graph, profile) if shared is not None else None
        traces.append(run_policy(sample_graph, profile, policy, cfg, thermal_init,
                                 schedule=schedule, thermal_tick=thermal_tick,
                                 throttle_limit=throttle_limit, sample_index=index))
    return traces


def simulate_sustained(graph: ComputationGraph, profile: DeviceProfile,
                       policy: GovernorPolicy, cfg: PartitionConfig,
                       thermal_init: ThermalState, duration: float,
                       throttle_limit: Optional[float] = None,
                       thermal_tick: Optional[float] = None) -> SustainedReport:
    """
    Back-to-back inferences until `duration` seconds have elapsed

    The schedule is planned once at the initial temperature. Temperature,
    device triplet and throttle state carry across inferences.

    Returns:
        SustainedReport with the whole trace and per-inference frame metrics
    """
    if duration <= 0:
        raise SimulationError("sustained duration must be > 0")

    trace = ExecutionTrace(policy=policy.name, graph_name=graph.name)
    schedule = None
    if policy.kind is not PolicyKind.REACTIVE_DEFAULT:
        schedule = plan_schedule(graph, profile, policy, cfg, thermal_init.temp)
    per_inference = len(graph) if schedule is None else len(schedule)

    executor = _Executor(profile, trace, thermal_init, thermal_tick, throttle_limit)
    metrics = PerformanceMetrics()
    inferences = 0
    while executor.t < duration:
        t_start, e_start = executor.t, trace.total_energy
        first_event = len(trace.events)
        _run_on(executor, graph, policy, schedule, inferences * per_inference)
        events = trace.events[first_event:]
        metrics.record_inference(
            t_start=t_start,
            latency_s=executor.t - t_start,
            energy_j=trace.total_energy - e_start,
            peak_temp=max(e.temp_end for e in events),
            throttled=any(e.kind is EventKind.THROTTLE for e in events))
        inferences += 1
    trace.block_count = per_inference

    logger.log_simulation(policy.name, graph.name, trace.makespan, trace.total_energy,
                          trace.total_switch_stall, inferences=inferences,
                          throttle_onset=trace.throttle_onset,
                          jitter_ms=metrics.get_jitter_ms())
    return SustainedReport(trace=trace, inferences=inferences, metrics=metrics)


# --- comparison metrics -----------------------------------------------------

def energy_efficiency_gain(trace: ExecutionTrace, baseline: ExecutionTrace) -> float:
    """100 * (E_baseline - E) / E_baseline"""
    if baseline.total_energy <= 0:
        raise ZeroBaselineEnergyError(f"baseline '{baseline.policy}' has zero energy")
    return 100.0 * (baseline.total_energy - trace.total_energy) / baseline.total_energy


def cost_gain_ratio(trace: ExecutionTrace, baseline: ExecutionTrace) -> float:
    """
    Latency increase per unit of energy gain, in percent

    Raises:
        NonPositiveGainError: the policy saves no energy against the baseline
    """
    gain = energy_efficiency_gain(trace, baseline) / 100.0
    if gain <= 0:
        raise NonPositiveGainError(
            f"'{trace.policy}' has no energy gain over '{baseline.policy}'")
    if baseline.makespan <= 0:
        raise SimulationError(f"baseline '{baseline.policy}' has zero makespan")
    latency_increase = (trace.makespan - baseline.makespan) / baseline.makespan
    return 100.0 * latency_increase / gain


def sweep_n(graph: ComputationGraph, profile: DeviceProfile, policy: GovernorPolicy,
            n_values: Sequence[float], cfg: PartitionConfig,
            thermal_init: ThermalState, **run_options) -> List[SweepRow]:
    """
    Re-partition and simulate at each amortization factor

    Args:
        n_values: Nonempty list of positive N (float('inf') allowed)
        run_options: Forwarded to run_policy (thermal_tick, throttle_limit)

    Returns:
        One SweepRow per N, in input order
    """
    if not n_values:
        raise SimulationError("sweep needs at least one N value")
    rows = []
    for n in n_values:
        n = float(n)
        if not n > 0:
            raise SimulationError(f"N values must be > 0, got {n}")
        trace = run_policy(graph, profile, policy, replace(cfg, n_factor=n),
                           thermal_init, **run_options)
        rows.append(SweepRow(n_factor=n, block_count=trace.block_count,
                             makespan=trace.makespan,
                             switch_stall=trace.total_switch_stall,
                             energy=trace.total_energy, mean_power=trace.mean_power))
        logger.debug("Sweep point", n_factor=n, blocks=trace.block_count,
                     energy_j=trace.total_energy)
    return rows


def ablation_policies(policy: GovernorPolicy) -> Dict[str, GovernorPolicy]:
    """
    GPU-only, +CPU lock and full FUSE variants of a SparseDVFS policy

    Returns:
        Label ("<kind>/<variant>") -> policy, in ABLATION_VARIANTS order
    """
    if policy.kind not in SPARSE_DVFS_KINDS:
        raise SimulationError(f"ablation needs a SparseDVFS policy, got '{policy.name}'")
    return {f"{policy.name}/{variant}": replace(policy, race_to_submit=race,
                                                memory_coordination=memory)
            for variant, (race, memory) in ABLATION_VARIANTS.items()}


# --- scenarios --------------------------------------------------------------

@dataclass
class Scenario:
    """
    One experiment: inputs, policy, partition settings and optional
    comparison / sweep / sustained-load sections. Paths are resolved
    relative to the scenario file.
    """
    name: str
    graph_path: Path
    profile_path: Path
    policy: GovernorPolicy
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    t0: Optional[float] = None
    thermal_tick: Optional[float] = None
    throttle_limit: Optional[float] = None
    trace_path: Optional[Path] = None
    amortized: bool = False
    profile_overrides: Dict = field(default_factory=dict)
    compare_policies: List[PolicyKind] = field(default_factory=list)
    baseline: Optional[PolicyKind] = None
    sweep_values: List[float] = field(default_factory=list)
    sustained_duration: Optional[float] = None
    ablation: bool = False

    def load_inputs(self) -> Tuple[ComputationGraph, DeviceProfile, Optional[SparsityTrace]]:
        graph = load_graph(self.graph_path)
        profile = with_overrides(load_profile(self.profile_path), self.profile_overrides)
        samples = load_trace(self.trace_path) if self.trace_path else None
        return graph, profile, samples

    def thermal_init(self, profile: DeviceProfile) -> ThermalState:
        return ThermalState.from_profile(profile, self.t0)

    def policy_for(self, kind: Union[str, PolicyKind]) -> GovernorPolicy:
        """Scenario policy knobs with another kind"""
        return replace(self.policy, kind=PolicyKind(kind))


def _parse_n(value) -> float:
    return math.inf if value in ("inf", "Infinity") else float(value)


def scenario_from_dict(data: Mapping, base_dir: Path, name: str = "scenario") -> Scenario:
    try:
        thermal = data.get("thermal", {})
        compare = data.get("compare", {})
        sweep = data.get("sweep", {})
        sustained = data.get("sustained", {})
        return Scenario(
            name=str(data.get("name", name)),
            graph_path=base_dir / data["graph"],
            profile_path=base_dir / data["profile"],
            policy=GovernorPolicy.from_dict(data.get("policy", {"kind": "sparse_dvfs_lookahead"})),
            partition=PartitionConfig.from_dict(data.get("partition", {})),
            t0=thermal.get("t0"),
            thermal_tick=thermal.get("tick"),
            throttle_limit=thermal.get("throttle_limit"),
            trace_path=base_dir / data["trace"] if data.get("trace") else None,
            amortized=bool(data.get("amortized", False)),
            profile_overrides=dict(data.get("profile_overrides", {})),
            compare_policies=[PolicyKind(k) for k in compare.get("policies", [])],
            baseline=PolicyKind(compare["baseline"]) if compare.get("baseline") else None,
            sweep_values=[_parse_n(n) for n in sweep.get("n_values", [])],
            sustained_duration=sustained.get("duration"),
            ablation=bool(compare.get("ablation", False)),
        )
    except KeyError as e:
        raise ScenarioError(f"{name}: missing field {e}")
    except ValueError as e:
        raise ScenarioError(f"{name}: {e}")


def load_scenario(path: PathLike) -> Scenario:
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})")
    return scenario_from_dict(data, path.parent, name=path.stem)
