"""
Offline Modeler Module

Closed-form, sparsity-aware prediction of operator latency and power on a
frequency triplet, energy as their product, and exhaustive search for the
energy-optimal triplet.

Latency is a timeline (Roofline) model: the slower of the effective compute
term and the effective memory term, plus a fixed per-operator overhead.
Power sums a dynamic term (activity factor decreasing with sparsity) and a
temperature-dependent leakage term over the CPU, GPU and memory domains.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from device import (Component, DeviceProfile, FrequencyTriplet, mem_bandwidth,
                    peak_perf, voltage_of)
from graph import Operator
from utils.logger import get_logger

logger = get_logger(__name__)


class ModelError(ValueError):
    pass


class SparsityDomainError(ModelError):
    pass


class EmptyBlockError(ModelError):
    pass


class InfeasibleBudgetError(ModelError):
    """No triplet meets the latency budget; carries the best achievable time"""

    def __init__(self, budget: float, min_t_exe: float, what: str = "operator"):
        self.budget = budget
        self.min_t_exe = min_t_exe
        super().__init__(
            f"latency budget {budget * 1000:.3f}ms infeasible for {what}: "
            f"minimum achievable t_exe is {min_t_exe * 1000:.3f}ms")


class Bound(str, Enum):
    COMPUTE = "compute"
    MEMORY = "memory"
    OVERHEAD = "overhead"


@dataclass(frozen=True)
class PerfEstimate:
    t_exe: float
    bound: Bound
    t_compute: float
    t_memory: float


@dataclass(frozen=True)
class PowerEstimate:
    p_total: float
    p_dynamic: float
    p_static: float

    @classmethod
    def of(cls, p_dynamic: float, p_static: float) -> "PowerEstimate":
        return cls(p_total=p_dynamic + p_static, p_dynamic=p_dynamic, p_static=p_static)


def classify(t_compute: float, t_memory: float) -> Bound:
    """Roofline class; the ridge point belongs to the memory regime"""
    if t_compute == 0.0 and t_memory == 0.0:
        return Bound.OVERHEAD
    return Bound.MEMORY if t_memory >= t_compute else Bound.COMPUTE


def predict_exec_time(op: Operator, f: FrequencyTriplet,
                      profile: DeviceProfile) -> PerfEstimate:
    """
    Predicted execution time of one operator at a triplet

    Args:
        op: Operator with workload, data volume and sparsities
        f: Frequency triplet (levels of the profile)
        profile: Device profile

    Returns:
        PerfEstimate with t_exe and the dominating branch
    """
    t_compute = op.effective_work / peak_perf(profile, f.f_cpu, f.f_gpu)
    t_memory = op.effective_bytes / mem_bandwidth(profile, f.f_mem)
    return PerfEstimate(
        t_exe=max(t_compute, t_memory) + profile.t_overhead,
        bound=classify(t_compute, t_memory),
        t_compute=t_compute,
        t_memory=t_memory,
    )


def activity_factor(s_comp: float, component: Component,
                    profile: DeviceProfile) -> float:
    """Effective switched capacitance (F), affine and decreasing in sparsity"""
    if not 0.0 <= s_comp <= 1.0:
        raise SparsityDomainError(f"s_comp={s_comp} outside [0, 1]")
    component = Component(component)
    a_max = profile.alpha_max[component]
    a_min = profile.alpha_min[component]
    return a_max - (a_max - a_min) * s_comp


def predict_power(f: FrequencyTriplet, temp: float, s_comp: float,
                  profile: DeviceProfile) -> PowerEstimate:
    """
    Dynamic plus leakage power summed over the three domains

    Args:
        f: Frequency triplet
        temp: Die temperature in C
        s_comp: Computational sparsity driving the activity factor
        profile: Device profile

    Returns:
        PowerEstimate in watts
    """
    leak = profile.k1 * temp + profile.k2
    p_dynamic = 0.0
    p_static = 0.0
    for component in Component:
        freq = f.get(component)
        volts = voltage_of(profile, component, freq)
        p_dynamic += activity_factor(s_comp, component, profile) * volts * volts * freq
        p_static += leak * volts
    return PowerEstimate.of(p_dynamic, p_static)


def predict_energy(op: Operator, f: FrequencyTriplet, temp: float,
                   profile: DeviceProfile) -> float:
    power = predict_power(f, temp, op.s_comp, profile)
    return power.p_total * predict_exec_time(op, f, profile).t_exe


def block_exec_time(ops: Sequence[Operator], f: FrequencyTriplet,
                    profile: DeviceProfile) -> float:
    """Sum of member execution times at one triplet"""
    if not ops:
        raise EmptyBlockError("block_exec_time needs at least one operator")
    return sum(predict_exec_time(op, f, profile).t_exe for op in ops)


# --- grid evaluation --------------------------------------------------------
# Same arithmetic order as the scalar path above, so a grid entry equals the
# scalar prediction at that triplet bit for bit.

def grid_exec_time(op: Operator, profile: DeviceProfile) -> np.ndarray:
    grid = profile.grid
    return np.maximum(op.effective_work / grid.peak,
                      op.effective_bytes / grid.bandwidth) + profile.t_overhead


def grid_power(temp: float, s_comp: float, profile: DeviceProfile) -> np.ndarray:
    grid = profile.grid
    leak = profile.k1 * temp + profile.k2
    a_c = activity_factor(s_comp, Component.CPU, profile)
    a_g = activity_factor(s_comp, Component.GPU, profile)
    a_m = activity_factor(s_comp, Component.MEM, profile)
    p_dynamic = (0.0 + a_c * grid.v_cpu * grid.v_cpu * grid.f_cpu
                 + a_g * grid.v_gpu * grid.v_gpu * grid.f_gpu
                 + a_m * grid.v_mem * grid.v_mem * grid.f_mem)
    p_static = 0.0 + leak * grid.v_cpu + leak * grid.v_gpu + leak * grid.v_mem
    return p_dynamic + p_static


def grid_energy(op: Operator, temp: float, profile: DeviceProfile) -> np.ndarray:
    return grid_power(temp, op.s_comp, profile) * grid_exec_time(op, profile)


def _argmin_feasible(energy: np.ndarray, t_exe: np.ndarray,
                     latency_budget: Optional[float], what: str) -> int:
    if latency_budget is None:
        return int(np.argmin(energy))
    feasible = t_exe <= latency_budget
    if not feasible.any():
        raise InfeasibleBudgetError(latency_budget, float(t_exe.min()), what)
    # np.argmin returns the first minimum, i.e. the tie-break order of the grid
    return int(np.argmin(np.where(feasible, energy, np.inf)))


def optimal_triplet(op: Operator, temp: float, profile: DeviceProfile,
                    latency_budget: Optional[float] = None) -> FrequencyTriplet:
    """
    Energy-optimal triplet over the full grid

    Ties go to the lower GPU, then CPU, then memory frequency.

    Args:
        op: Operator
        temp: Temperature snapshot in C
        profile: Device profile
        latency_budget: Optional ceiling on t_exe in seconds

    Returns:
        The minimizing FrequencyTriplet

    Raises:
        InfeasibleBudgetError: budget below the minimum achievable t_exe
    """
    index = _argmin_feasible(grid_energy(op, temp, profile),
                             grid_exec_time(op, profile),
                             latency_budget, f"operator '{op.id}'")
    return profile.grid.triplets[index]


def optimal_block_triplet(ops: Sequence[Operator], temp: float,
                          profile: DeviceProfile,
                          latency_budget: Optional[float] = None) -> FrequencyTriplet:
    """Single triplet minimizing the summed energy of a whole operator list"""
    if not ops:
        raise EmptyBlockError("optimal_block_triplet needs at least one operator")
    energy = np.zeros(len(profile.grid))
    t_total = np.zeros(len(profile.grid))
    for op in ops:
        energy += grid_energy(op, temp, profile)
        t_total += grid_exec_time(op, profile)
    index = _argmin_feasible(energy, t_total, latency_budget, f"{len(ops)}-operator block")
    return profile.grid.triplets[index]
