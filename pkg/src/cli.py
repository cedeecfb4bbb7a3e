"""
Command-Line Interface

Subcommands:
    partition  partition a graph and report block/switching summary
    simulate   run a scenario's policy and emit the execution trace
    compare    run several policies on a scenario and report derived metrics
    sweep      re-run a scenario over amortization factors N
    validate   check input files and, with --seed, randomized invariants

Data goes to stdout (or --out, written atomically); diagnostics go to stderr.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from device import ProfileError, load_profile
from governor import GovernorPolicy, PolicyKind
from graph import GraphError, load_graph, load_trace, random_graph, apply_trace
from modeler import ModelError
from partitioner import (PartitionConfig, PartitionError, dp_optimal_partition,
                         operator_level_schedule, partition, save_schedule,
                         schedule_energy, switching_totals)
from sim import (ExecutionTrace, Scenario, ScenarioError, SimulationError,
                 NonPositiveGainError, cost_gain_ratio, energy_efficiency_gain,
                 load_scenario, simulate, simulate_sustained, sweep_n,
                 ablation_policies)
from utils.logger import get_logger
from utils.metrics import LatencyTimer

logger = get_logger(__name__)

REPORT_VERSION = 1

SUMMARY_COLUMNS = ["policy", "makespan_s", "energy_j", "mean_power_w", "peak_power_w",
                   "switch_stall_s", "block_count", "peak_temp_c",
                   "efficiency_gain_pct", "cost_gain_ratio_pct"]
EVENT_COLUMNS = ["sample_index", "t_start", "t_end", "kind", "f_cpu", "f_gpu", "f_mem",
                 "power", "energy", "temp_start", "temp_end", "block_index"]
SWEEP_COLUMNS = ["n", "block_count", "makespan_s", "switch_stall_s", "energy_j",
                 "mean_power_w"]


class ValidationFailure(RuntimeError):
    pass


@dataclass
class RunReport:
    """Per-policy summaries plus metrics derived against a baseline"""
    scenario: Dict
    baseline: str
    summaries: List[Dict] = field(default_factory=list)
    derived: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "version": REPORT_VERSION,
            "scenario": self.scenario,
            "baseline": self.baseline,
            "summaries": self.summaries,
            "derived": self.derived,
        }

    def to_csv(self) -> str:
        derived = {row["policy"]: row for row in self.derived}
        rows = []
        for summary in self.summaries:
            row = {column: summary.get(column) for column in SUMMARY_COLUMNS}
            metrics = derived.get(summary["policy"])
            if summary["policy"] == self.baseline:
                row["efficiency_gain_pct"] = 0.0
            elif metrics is not None:
                row["efficiency_gain_pct"] = metrics["efficiency_gain_pct"]
                row["cost_gain_ratio_pct"] = metrics["cost_gain_ratio_pct"]
            rows.append(row)
        return _csv_text("compare", SUMMARY_COLUMNS, rows)


def _csv_text(kind: str, columns: Sequence[str], rows: Sequence[Dict]) -> str:
    buffer = io.StringIO()
    buffer.write(f"# sparse-dvfs {kind} report v{REPORT_VERSION}\n")
    writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in row.items()})
    return buffer.getvalue()


def read_csv_report(text: str) -> List[Dict[str, str]]:
    """Rows of a report written by this tool (version comment skipped)"""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, 'w') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("Output written", path=str(path))


def _json_text(data) -> str:
    return json.dumps(data, indent=2, default=str) + "\n"


def _event_rows(trace: ExecutionTrace) -> List[Dict]:
    """One row per event, closed by a summary row spanning the whole run"""
    rows = [{"sample_index": trace.sample_index, **event.to_dict(), "energy": event.energy}
            for event in trace.events]
    rows.append({"sample_index": trace.sample_index, "t_start": 0.0, "t_end": trace.makespan,
                 "kind": "summary", "power": trace.mean_power, "energy": trace.total_energy,
                 "temp_end": trace.final_temp})
    return rows


# --- commands ---------------------------------------------------------------

def cmd_partition(args, config) -> int:
    graph = load_graph(args.graph)
    profile = load_profile(args.profile)
    cfg = PartitionConfig(
        n_factor=args.n if args.n is not None else config.partition_n,
        similarity_eps=args.eps if args.eps is not None else config.partition_eps,
        latency_budget=args.budget if args.budget is not None else config.latency_budget,
    )
    temp = args.t0 if args.t0 is not None else config.t0(profile)

    schedule = (dp_optimal_partition(graph, profile, cfg, temp,
                                     max_ops=int(config.simulation.get("dp_max_ops", 512)))
                if args.dp
                else partition(graph, profile, cfg, temp))
    block_total = switching_totals(schedule, profile)
    op_total = switching_totals(operator_level_schedule(graph, profile, cfg, temp), profile)

    if args.out:
        save_schedule(schedule, args.out)

    lines = [f"graph: {graph.name} ({len(graph)} operators, "
             f"{graph.total_flops / 1e9:.2f} GFLOPs)",
             f"blocks: {len(schedule)}"]
    for index, block in enumerate(schedule.blocks):
        lines.append(f"  block {index}: {block.ops[0].id}..{block.ops[-1].id} "
                     f"({len(block.ops)} ops) @ {block.f_block.label}  "
                     f"t_block={block.t_block * 1000:.3f}ms")
    reduction = f"{op_total / block_total:.2f}x" if block_total > 0 else "n/a"
    lines.append(f"switching: {block_total * 1000:.3f}ms "
                 f"(operator-level {op_total * 1000:.3f}ms, reduction {reduction})")
    lines.append(f"modeled energy: {schedule_energy(schedule, profile, temp):.4f}J")
    print("\n".join(lines))
    return 0


def _scenario_with_overrides(args, config) -> Scenario:
    scenario = load_scenario(args.scenario)
    if scenario.t0 is None:
        scenario.t0 = config.simulation.get("t0")
    if scenario.thermal_tick is None:
        scenario.thermal_tick = config.simulation.get("thermal_tick")
    if getattr(args, "n", None) is not None and not isinstance(args.n, list):
        scenario.partition = replace(scenario.partition, n_factor=args.n)
    if getattr(args, "eps", None) is not None:
        scenario.partition = replace(scenario.partition, similarity_eps=args.eps)
    return scenario


def _run_scenario_policy(scenario: Scenario, policy: GovernorPolicy,
                         graph, profile, samples) -> ExecutionTrace:
    traces = simulate(graph, profile, policy, scenario.partition,
                      scenario.thermal_init(profile), samples,
                      amortized=scenario.amortized,
                      thermal_tick=scenario.thermal_tick,
                      throttle_limit=scenario.throttle_limit)
    return traces[0] if len(traces) == 1 else ExecutionTrace.concatenate(traces)


def _scenario_echo(scenario: Scenario) -> Dict:
    return {
        "name": scenario.name,
        "graph": str(scenario.graph_path),
        "profile": str(scenario.profile_path),
        "policy": scenario.policy.to_dict(),
        "partition": scenario.partition.to_dict(),
        "t0": scenario.t0,
        "throttle_limit": scenario.throttle_limit,
        "trace": str(scenario.trace_path) if scenario.trace_path else None,
        "amortized": scenario.amortized,
    }


def cmd_simulate(args, config) -> int:
    scenario = _scenario_with_overrides(args, config)
    policy = scenario.policy_for(args.policy) if args.policy else scenario.policy
    graph, profile, samples = scenario.load_inputs()

    if scenario.sustained_duration:
        report = simulate_sustained(graph, profile, policy, scenario.partition,
                                    scenario.thermal_init(profile),
                                    scenario.sustained_duration,
                                    throttle_limit=scenario.throttle_limit,
                                    thermal_tick=scenario.thermal_tick)
        traces = [report.trace]
        payload = {"version": REPORT_VERSION, "scenario": _scenario_echo(scenario),
                   "sustained": report.to_dict()}
        if not args.quiet:
            report.metrics.print_summary()
    else:
        traces = simulate(graph, profile, policy, scenario.partition,
                          scenario.thermal_init(profile), samples,
                          amortized=scenario.amortized,
                          thermal_tick=scenario.thermal_tick,
                          throttle_limit=scenario.throttle_limit)
        payload = {"version": REPORT_VERSION, "scenario": _scenario_echo(scenario),
                   "runs": [trace.to_dict() for trace in traces]}

    if args.format == "csv":
        rows = [row for trace in traces for row in _event_rows(trace)]
        _emit(_csv_text("trace", EVENT_COLUMNS, rows), args.out)
    else:
        _emit(_json_text(payload), args.out)
    return 0


def build_report(scenario: Scenario, policies: Sequence[PolicyKind],
                 baseline: PolicyKind, ablation: bool = False) -> RunReport:
    """
    Run every policy (baseline included) and derive metrics against it

    With `ablation`, the scenario policy's GPU-only, +CPU lock and full FUSE
    variants are added as extra rows labelled "<kind>/<variant>".
    """
    graph, profile, samples = scenario.load_inputs()
    runs = {kind.value: scenario.policy_for(kind)
            for kind in dict.fromkeys(list(policies) + [baseline])}
    if ablation:
        runs.update(ablation_policies(scenario.policy))
    traces = {label: _run_scenario_policy(scenario, policy, graph, profile, samples)
              for label, policy in runs.items()}

    report = RunReport(scenario=_scenario_echo(scenario), baseline=baseline.value)
    base = traces[baseline.value]
    for label, trace in traces.items():
        summary = trace.summary()
        summary["policy"] = label
        summary["efficiency_gain_pct"] = energy_efficiency_gain(trace, base)
        report.summaries.append(summary)
        if label == baseline.value:
            continue
        try:
            ratio = cost_gain_ratio(trace, base)
        except NonPositiveGainError:
            ratio = None
        report.derived.append({
            "policy": label,
            "baseline": baseline.value,
            "efficiency_gain_pct": summary["efficiency_gain_pct"],
            "cost_gain_ratio_pct": ratio,
        })
    return report


def _policy_kinds(values: Sequence[str]) -> List[PolicyKind]:
    """Flatten repeated and comma-separated --policy values"""
    names = [name.strip() for value in values for name in value.split(",")]
    return [PolicyKind(name) for name in dict.fromkeys(n for n in names if n)]


def cmd_compare(args, config) -> int:
    scenario = _scenario_with_overrides(args, config)
    if args.policies:
        policies = _policy_kinds(args.policies)
    else:
        policies = scenario.compare_policies or [scenario.policy.kind]
    baseline = PolicyKind(args.baseline) if args.baseline else (
        scenario.baseline or PolicyKind(config.governor.get("baseline", "reactive_default")))

    report = build_report(scenario, policies, baseline,
                          ablation=args.ablation or scenario.ablation)
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        _emit(_json_text(report.to_dict()), args.out)
    return 0


def cmd_sweep(args, config) -> int:
    scenario = _scenario_with_overrides(args, config)
    n_values = args.n or scenario.sweep_values or config.governor.get("sweep_n", [1, 2, 5, 10])
    graph, profile, _ = scenario.load_inputs()
    rows = sweep_n(graph, profile, scenario.policy, [float(n) for n in n_values],
                   scenario.partition, scenario.thermal_init(profile),
                   thermal_tick=scenario.thermal_tick,
                   throttle_limit=scenario.throttle_limit)
    if args.format == "json":
        _emit(_json_text({"version": REPORT_VERSION, "scenario": _scenario_echo(scenario),
                          "rows": [row.to_dict() for row in rows]}), args.out)
    else:
        _emit(_csv_text("sweep", SWEEP_COLUMNS, [row.to_dict() for row in rows]), args.out)
    return 0


def _check_random_instances(profile, seed: int, instances: int, n_ops: int) -> List[str]:
    rng = np.random.default_rng(seed)
    cfg = PartitionConfig()
    temp = profile.t_ambient
    threshold = cfg.n_factor * profile.t_switch_base
    for index in range(instances):
        graph = random_graph(rng, n_ops, name=f"random_{seed}_{index}")
        schedule = partition(graph, profile, cfg, temp)
        if schedule.op_ids != graph.op_ids:
            raise ValidationFailure(f"{graph.name}: blocks do not cover the operator order")
        for block in schedule.blocks[:-1]:
            if not block.t_block >= threshold:
                raise ValidationFailure(f"{graph.name}: interior block below N*t_switch")
        if partition(graph, profile, cfg, temp) != schedule:
            raise ValidationFailure(f"{graph.name}: partition is not deterministic")
        greedy = schedule_energy(schedule, profile, temp)
        oracle = schedule_energy(dp_optimal_partition(graph, profile, cfg, temp), profile, temp)
        if oracle > greedy * (1 + 1e-9):
            raise ValidationFailure(f"{graph.name}: DP energy {oracle} exceeds greedy {greedy}")
    return [f"OK partition coverage ({instances} instances)",
            f"OK amortization guard ({instances} instances)",
            f"OK determinism ({instances} instances)",
            f"OK dp <= greedy energy ({instances} instances)"]


def cmd_validate(args, config) -> int:
    messages = []
    graph = profile = None
    if args.graph:
        graph = load_graph(args.graph)
        messages.append(f"OK graph {graph.name}: {len(graph)} operators, "
                        f"{graph.total_flops / 1e9:.2f} GFLOPs, {graph.total_bytes / 1e6:.1f} MB")
    if args.profile:
        profile = load_profile(args.profile)
        messages.append(f"OK profile {profile.name}: {len(profile.cpu_levels)}x"
                        f"{len(profile.gpu_levels)}x{len(profile.mem_levels)} levels")
    if args.trace:
        samples = load_trace(args.trace)
        if graph is not None:
            for index in range(len(samples)):
                apply_trace(graph, samples, index)
        messages.append(f"OK trace: {len(samples)} samples")
    if args.scenario:
        scenario = load_scenario(args.scenario)
        scenario_graph, scenario_profile, _ = scenario.load_inputs()
        profile = profile or scenario_profile
        messages.append(f"OK scenario {scenario.name}: {scenario.policy.name} on "
                        f"{scenario_graph.name}")
    if args.seed is not None:
        if profile is None:
            raise ValidationFailure("--seed needs --profile or --scenario")
        messages += _check_random_instances(profile, args.seed, args.instances, args.ops)
    if not messages:
        raise ValidationFailure("nothing to validate")
    print("\n".join(messages))
    return 0


# --- parser -----------------------------------------------------------------

def _n_value(text: str) -> float:
    value = math.inf if text.lower() in ("inf", "infinity") else float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"N must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-dvfs",
        description="Sparsity-aware DVFS modeling and simulation toolkit")
    parser.add_argument("--config", type=Path, default=None,
                        help="config.json with tool defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a graph into super-blocks")
    p.add_argument("--graph", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--n", type=_n_value, default=None, help="amortization factor N")
    p.add_argument("--eps", type=float, default=None, help="similarity tolerance")
    p.add_argument("--budget", type=float, default=None, help="per-operator latency budget (s)")
    p.add_argument("--t0", type=float, default=None, help="temperature (C)")
    p.add_argument("--dp", action="store_true", help="use the DP oracle instead of greedy")
    p.add_argument("--out", default=None, help="schedule JSON path")
    p.set_defaults(handler=cmd_partition)

    p = sub.add_parser("simulate", help="simulate a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", choices=[k.value for k in PolicyKind], default=None)
    p.add_argument("--n", type=_n_value, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="compare policies against a baseline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policies", "--policy", dest="policies", action="append", default=None,
                   help="policy kinds, comma-separated or repeated")
    p.add_argument("--ablation", action="store_true",
                   help="add GPU-only, +CPU lock and full FUSE variants of the scenario policy")
    p.add_argument("--baseline", choices=[k.value for k in PolicyKind], default=None)
    p.add_argument("--n", type=_n_value, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("sweep", help="sweep the amortization factor N")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=_n_value, nargs="+", default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("validate", help="validate inputs and randomized invariants")
    p.add_argument("--graph", default=None)
    p.add_argument("--profile", default=None)
    p.add_argument("--trace", default=None)
    p.add_argument("--scenario", default=None)
    p.add_argument("--seed", type=int, default=None, help="seed for random instances")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--ops", type=int, default=8, help="operators per random instance")
    p.set_defaults(handler=cmd_validate)

    return parser


def run(argv: Optional[Sequence[str]], config) -> int:
    """
    Parse and dispatch one command

    Args:
        argv: Arguments without the program name
        config: ToolkitConfig supplying defaults

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        with LatencyTimer() as timer:
            code = args.handler(args, config)
        logger.log_performance(args.command, timer.elapsed_ms)
        return code
    except (GraphError, ProfileError, ModelError, PartitionError, SimulationError,
            ScenarioError, ValidationFailure, OSError, ValueError) as e:
        logger.log_error_with_context(error=e, context=f"cmd_{args.command}")
        print(f"error: {e}", file=sys.stderr)
        return 1
