"""
Runtime Graph Partitioner Module

Greedy sparse-aware aggregation of the topological operator sequence into
super-blocks. A block boundary is only emitted once the running block is long
enough to amortize a frequency switch (T_est >= N * t_switch_base) and the
next operator's optimal triplet diverges from the block's. Merged blocks run
at the componentwise maximum of their members' optima.

Also provides an exact dynamic-programming oracle over contiguous partitions
and the switching/energy accounting used to compare schedules.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from device import DeviceProfile, FrequencyTriplet, switch_latency
from graph import ComputationGraph, Operator, topo_order
from modeler import (InfeasibleBudgetError, block_exec_time, grid_energy,
                     grid_exec_time, optimal_triplet, predict_energy,
                     predict_power)
from utils.logger import get_logger

logger = get_logger(__name__)

DP_MAX_OPS = 512


class PartitionError(ValueError):
    pass


class PartitionSizeError(PartitionError):
    pass


@dataclass(frozen=True)
class PartitionConfig:
    """
    Partitioner knobs

    n_factor: amortization granularity N (float('inf') merges everything)
    similarity_eps: per-component relative tolerance for "same triplet"
    latency_budget: optional per-operator t_exe ceiling for optimal_triplet
    """
    n_factor: float = 5.0
    similarity_eps: float = 0.05
    latency_budget: Optional[float] = None

    def __post_init__(self):
        if not self.n_factor > 0:
            raise PartitionError(f"n_factor must be > 0, got {self.n_factor}")
        if self.similarity_eps < 0:
            raise PartitionError(f"similarity_eps must be >= 0, got {self.similarity_eps}")
        if self.latency_budget is not None and self.latency_budget <= 0:
            raise PartitionError("latency_budget must be positive when given")

    @classmethod
    def from_dict(cls, data: Dict) -> "PartitionConfig":
        n = data.get("n", data.get("n_factor", 5.0))
        return cls(
            n_factor=math.inf if n == "inf" else float(n),
            similarity_eps=float(data.get("eps", data.get("similarity_eps", 0.05))),
            latency_budget=data.get("budget", data.get("latency_budget")),
        )

    def to_dict(self) -> Dict:
        return {
            "n": "inf" if math.isinf(self.n_factor) else self.n_factor,
            "eps": self.similarity_eps,
            "budget": self.latency_budget,
        }


@dataclass(frozen=True)
class SuperBlock:
    ops: Tuple[Operator, ...]
    f_block: FrequencyTriplet
    t_block: float
    # optimal triplet of each member at partition time
    member_optima: Tuple[FrequencyTriplet, ...] = field(default=(), compare=False)

    @property
    def op_ids(self) -> List[str]:
        return [op.id for op in self.ops]


@dataclass(frozen=True)
class Schedule:
    blocks: Tuple[SuperBlock, ...]
    graph_name: str = ""
    n_factor: Optional[float] = None

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def operators(self) -> List[Operator]:
        return [op for block in self.blocks for op in block.ops]

    @property
    def op_ids(self) -> List[str]:
        return [op.id for op in self.operators]

    @property
    def makespan_estimate(self) -> float:
        return sum(block.t_block for block in self.blocks)


def make_block(ops: Sequence[Operator], f_block: FrequencyTriplet,
               profile: DeviceProfile,
               member_optima: Sequence[FrequencyTriplet] = ()) -> SuperBlock:
    ops = tuple(ops)
    return SuperBlock(ops=ops, f_block=f_block,
                      t_block=block_exec_time(ops, f_block, profile),
                      member_optima=tuple(member_optima))


def similar(a: FrequencyTriplet, b: FrequencyTriplet, eps: float) -> bool:
    """|a_c - b_c| <= eps * b_c for every component"""
    return all(abs(x - y) <= eps * y for x, y in zip(a, b))


def partition(graph: ComputationGraph, profile: DeviceProfile,
              cfg: PartitionConfig, temp: float) -> Schedule:
    """
    Greedy super-block partitioning of the topological order

    Args:
        graph: Validated graph
        profile: Device profile
        cfg: N, similarity tolerance and optional budget
        temp: Temperature snapshot used for every optimal-triplet query

    Returns:
        Schedule covering every operator exactly once, in order
    """
    ops = topo_order(graph)
    threshold = cfg.n_factor * profile.t_switch_base

    f_curr = optimal_triplet(ops[0], temp, profile, cfg.latency_budget)
    current: List[Operator] = [ops[0]]
    optima: List[FrequencyTriplet] = [f_curr]
    blocks: List[SuperBlock] = []

    for op in ops[1:]:
        f_next = optimal_triplet(op, temp, profile, cfg.latency_budget)
        # Candidate is not counted toward the amortization check
        t_est = block_exec_time(current, f_curr, profile)

        if t_est < threshold or similar(f_next, f_curr, cfg.similarity_eps):
            current.append(op)
            optima.append(f_next)
            f_curr = f_curr.componentwise_max(f_next)
        else:
            blocks.append(make_block(current, f_curr, profile, optima))
            logger.debug("Block emitted", graph=graph.name, block=len(blocks) - 1,
                         ops=len(current), t_block_ms=blocks[-1].t_block * 1000.0,
                         triplet=f_curr.label)
            current, optima, f_curr = [op], [f_next], f_next

    blocks.append(make_block(current, f_curr, profile, optima))

    schedule = Schedule(blocks=tuple(blocks), graph_name=graph.name,
                        n_factor=cfg.n_factor)
    logger.log_partition(graph.name, len(ops), len(blocks), cfg.n_factor,
                         switching_totals(schedule, profile))
    return schedule


def operator_level_schedule(graph: ComputationGraph, profile: DeviceProfile,
                            cfg: PartitionConfig, temp: float) -> Schedule:
    """One block per operator, each at its own optimal triplet"""
    blocks = []
    for op in topo_order(graph):
        f_opt = optimal_triplet(op, temp, profile, cfg.latency_budget)
        blocks.append(make_block([op], f_opt, profile, [f_opt]))
    return Schedule(blocks=tuple(blocks), graph_name=graph.name, n_factor=0.0)


def switching_totals(schedule: Schedule, profile: DeviceProfile) -> float:
    """Cumulative switch latency over consecutive block transitions (s)"""
    return sum(switch_latency(profile, a.f_block, b.f_block)
               for a, b in zip(schedule.blocks, schedule.blocks[1:]))


def transition_energy(f_to: FrequencyTriplet, temp: float,
                      profile: DeviceProfile) -> float:
    """Energy charged for one switch: idle-activity power at the destination"""
    return predict_power(f_to, temp, 1.0, profile).p_total * profile.t_switch_base


def schedule_energy(schedule: Schedule, profile: DeviceProfile, temp: float) -> float:
    """
    Modeled energy of a schedule at a fixed temperature

    Per-operator energy at each block's triplet plus one transition charge
    for every boundary between distinct triplets.
    """
    total = 0.0
    previous: Optional[FrequencyTriplet] = None
    for block in schedule.blocks:
        if previous is not None and block.f_block != previous:
            total += transition_energy(block.f_block, temp, profile)
        total += sum(predict_energy(op, block.f_block, temp, profile) for op in block.ops)
        previous = block.f_block
    return total


def dp_optimal_partition(graph: ComputationGraph, profile: DeviceProfile,
                         cfg: PartitionConfig, temp: float,
                         max_ops: int = DP_MAX_OPS) -> Schedule:
    """
    Minimum-energy contiguous partition (evaluation oracle)

    Jointly chooses segment boundaries and one grid triplet per segment to
    minimize schedule_energy. State is (prefix length, triplet of the last
    segment); the switch charge depends only on the destination, so each
    step is O(grid) after a running minimum over segment starts.

    Args:
        graph: Validated graph
        profile: Device profile
        cfg: Only latency_budget is used (per-operator t_exe ceiling)
        temp: Temperature snapshot
        max_ops: Size guard

    Returns:
        Schedule with adjacent same-triplet segments merged
    """
    ops = topo_order(graph)
    n = len(ops)
    if n > max_ops:
        raise PartitionSizeError(
            f"dp_optimal_partition supports at most {max_ops} operators, got {n}")

    grid = profile.grid
    size = len(grid)

    op_energy = np.empty((n, size))
    feasible = np.ones((n, size), dtype=bool)
    for i, op in enumerate(ops):
        op_energy[i] = grid_energy(op, temp, profile)
        if cfg.latency_budget is not None:
            t_exe = grid_exec_time(op, profile)
            feasible[i] = t_exe <= cfg.latency_budget
            if not feasible[i].any():
                raise InfeasibleBudgetError(cfg.latency_budget, float(t_exe.min()),
                                            f"operator '{op.id}'")
    prefix = np.zeros((n + 1, size))
    np.cumsum(np.where(feasible, op_energy, 0.0), axis=0, out=prefix[1:])

    switch_cost = np.array([transition_energy(t, temp, profile) for t in grid.triplets])

    dp = np.full((n + 1, size), np.inf)
    seg_start = np.zeros((n + 1, size), dtype=np.int64)
    came_from = np.zeros((n + 1, size), dtype=np.int64)

    running = np.full(size, np.inf)
    running_start = np.zeros(size, dtype=np.int64)
    columns = np.arange(size)

    for j in range(1, n + 1):
        i = j - 1
        # Best cost of entering a new segment at position i with each triplet
        if i == 0:
            entry = np.zeros(size)
            came_from[0] = columns
        else:
            best_prev = int(np.argmin(dp[i]))
            switched = dp[i, best_prev] + switch_cost
            stay = dp[i] <= switched
            entry = np.where(stay, dp[i], switched)
            came_from[i] = np.where(stay, columns, best_prev)

        candidate = entry - prefix[i]
        better = candidate < running
        running = np.where(better, candidate, running)
        running_start = np.where(better, i, running_start)

        # No segment at triplet g may contain an operator infeasible at g
        running[~feasible[i]] = np.inf

        dp[j] = running + prefix[j]
        seg_start[j] = running_start

    last = int(np.argmin(dp[n]))
    if not np.isfinite(dp[n, last]):
        raise PartitionError("no feasible partition under the latency budget")

    segments: List[Tuple[int, int, int]] = []
    j, g = n, last
    while j > 0:
        i = int(seg_start[j, g])
        segments.append((i, j, g))
        g = int(came_from[i, g]) if i > 0 else g
        j = i
    segments.reverse()

    blocks: List[SuperBlock] = []
    for i, j, g in segments:
        triplet = grid.triplets[g]
        if blocks and blocks[-1].f_block == triplet:
            blocks[-1] = make_block(blocks[-1].ops + tuple(ops[i:j]), triplet, profile)
        else:
            blocks.append(make_block(ops[i:j], triplet, profile))

    logger.debug("DP partition done", graph=graph.name, operators=n,
                 blocks=len(blocks), energy_j=float(dp[n, last]))
    return Schedule(blocks=tuple(blocks), graph_name=graph.name, n_factor=cfg.n_factor)


def schedule_to_dict(schedule: Schedule) -> Dict:
    return {
        "graph": schedule.graph_name,
        "n": (None if schedule.n_factor is None
              else "inf" if math.isinf(schedule.n_factor) else schedule.n_factor),
        "blocks": [
            {
                "op_ids": block.op_ids,
                "f_cpu": block.f_block.f_cpu,
                "f_gpu": block.f_block.f_gpu,
                "f_mem": block.f_block.f_mem,
                "t_block": block.t_block,
            }
            for block in schedule.blocks
        ],
    }


def save_schedule(schedule: Schedule, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, 'w') as f:
        json.dump(schedule_to_dict(schedule), f, indent=2)
    tmp.replace(path)
