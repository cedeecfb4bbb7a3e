#!/usr/bin/env python3
"""
Tests for the event-timeline simulator, comparison metrics and scenarios
"""
import json
import math

import pytest

from governor import GovernorPolicy, PolicyKind, ThermalState, coordinate_memory
from graph import ComputationGraph, Operator, OperatorKind, load_trace
from modeler import InfeasibleBudgetError, predict_exec_time
from partitioner import PartitionConfig, make_block, partition
from sim import (EventKind, ExecutionTrace, NonPositiveGainError, ScenarioError,
                 SimulationError, ZeroBaselineEnergyError, ablation_policies, cost_gain_ratio,
                 energy_efficiency_gain, fuse_block, load_scenario, plan_schedule, run_policy,
                 simulate, simulate_sustained, sweep_n)

CFG = PartitionConfig()


def _policy(kind, **kwargs):
    return GovernorPolicy(PolicyKind(kind), **kwargs)


def _start(profile):
    return ThermalState.from_profile(profile, 25.0)


def _assert_timeline(trace):
    assert trace.events
    assert trace.events[0].t_start == 0.0
    for a, b in zip(trace.events, trace.events[1:]):
        assert b.t_start == a.t_end
    for event in trace.events:
        assert event.t_end > event.t_start
    assert trace.makespan == trace.events[-1].t_end


def _trace(energy, makespan, policy="p"):
    return ExecutionTrace(policy=policy, graph_name="g", total_energy=energy, makespan=makespan)


class TestRunPolicy:

    def test_single_block_serial_has_no_stall(self, profile):
        graph = ComputationGraph(name="one", operators=(
            Operator("a", OperatorKind.CONV, w_comp=300e6, d_mem=6e6),))
        trace = run_policy(graph, profile, _policy("sparse_dvfs_serial"), CFG, _start(profile))
        schedule = plan_schedule(graph, profile, _policy("sparse_dvfs_serial"), CFG, 25.0)

        assert trace.total_switch_stall == 0.0
        assert trace.makespan == pytest.approx(schedule.blocks[0].t_block, rel=1e-12)
        assert trace.block_count == 1

    def test_max_static_makespan(self, profile, graphs):
        for graph in graphs.values():
            trace = run_policy(graph, profile, _policy("max_static"), CFG, _start(profile))
            expected = sum(predict_exec_time(op, profile.max_triplet, profile).t_exe
                           for op in graph.operators)
            assert trace.makespan == pytest.approx(expected, rel=1e-12)
            assert trace.total_switch_stall == 0.0
            assert {e.triplet for e in trace.events} == {profile.max_triplet}

    def test_lookahead_vs_serial(self, profile, graphs):
        for graph in graphs.values():
            serial = run_policy(graph, profile, _policy("sparse_dvfs_serial"), CFG,
                                _start(profile))
            lookahead = run_policy(graph, profile, _policy("sparse_dvfs_lookahead"), CFG,
                                   _start(profile))
            assert serial.block_count == lookahead.block_count
            assert lookahead.makespan <= serial.makespan
            saved = serial.total_switch_stall - lookahead.total_switch_stall
            assert serial.makespan - lookahead.makespan == pytest.approx(saved, rel=1e-9)

    def test_trace_conservation(self, profile, graphs):
        for kind in PolicyKind:
            trace = run_policy(graphs["resnet18"], profile, _policy(kind), CFG, _start(profile))
            _assert_timeline(trace)
            assert trace.total_energy == pytest.approx(
                sum(e.power * e.duration for e in trace.events), rel=1e-9)
            assert trace.total_switch_stall == pytest.approx(
                sum(e.duration for e in trace.events if e.kind is EventKind.SWITCH_STALL))
            assert sum(trace.block_energies.values()) <= trace.total_energy * (1 + 1e-12)
            assert trace.peak_temp >= max(e.temp_end for e in trace.events)

    def test_deterministic(self, profile, graphs):
        for kind in ("sparse_dvfs_lookahead", "reactive_default"):
            a = run_policy(graphs["vit_b16"], profile, _policy(kind), CFG, _start(profile))
            b = run_policy(graphs["vit_b16"], profile, _policy(kind), CFG, _start(profile))
            assert a.to_dict() == b.to_dict()

    def test_boost_events_follow_race_to_submit(self, profile, graphs):
        graph = graphs["resnet18"]
        boosted = run_policy(graph, profile, _policy("sparse_dvfs_lookahead"), CFG,
                             _start(profile))
        plain = run_policy(graph, profile, _policy("sparse_dvfs_lookahead",
                                                   race_to_submit=False), CFG, _start(profile))
        boosts = [e for e in boosted.events if e.kind is EventKind.CPU_BOOST]

        assert len(boosts) == boosted.block_count
        assert all(e.triplet.f_cpu == profile.cpu_levels[-1] for e in boosts)
        assert not any(e.kind is EventKind.CPU_BOOST for e in plain.events)

    def test_model_level_static_uses_one_triplet(self, profile, graphs):
        trace = run_policy(graphs["vit_b16"], profile, _policy("model_level_static"), CFG,
                           _start(profile))
        assert len({e.triplet for e in trace.events}) == 1
        assert trace.total_switch_stall == 0.0

    def test_model_level_static_honours_latency_budget(self, profile, graphs):
        tight = PartitionConfig(latency_budget=1e-6)
        with pytest.raises(InfeasibleBudgetError):
            plan_schedule(graphs["resnet18"], profile, _policy("model_level_static"), tight, 25.0)

        loose = PartitionConfig(latency_budget=1.0)
        unbounded = plan_schedule(graphs["resnet18"], profile, _policy("model_level_static"),
                                  CFG, 25.0)
        bounded = plan_schedule(graphs["resnet18"], profile, _policy("model_level_static"),
                                loose, 25.0)
        assert bounded.blocks[0].f_block == unbounded.blocks[0].f_block

    def test_tick_mode_close_to_event_mode(self, profile, graphs):
        graph = graphs["resnet18"]
        coarse = run_policy(graph, profile, _policy("max_static"), CFG, _start(profile))
        fine = run_policy(graph, profile, _policy("max_static"), CFG, _start(profile),
                          thermal_tick=0.001)

        assert len(fine.events) == len(coarse.events)
        assert fine.makespan == coarse.makespan
        assert fine.total_energy == pytest.approx(coarse.total_energy, rel=1e-3)

    def test_invalid_tick(self, profile, graphs):
        with pytest.raises(SimulationError):
            run_policy(graphs["resnet18"], profile, _policy("max_static"), CFG,
                       _start(profile), thermal_tick=0.0)

    def test_throttle_forces_minimum_triplet(self, profile, graphs):
        hot = ThermalState.from_profile(profile, 80.0)
        trace = run_policy(graphs["resnet18"], profile, _policy("max_static"), CFG, hot,
                           throttle_limit=70.0)
        throttled = [e for e in trace.events if e.kind is EventKind.THROTTLE]

        assert throttled
        assert trace.throttle_onset == 0.0
        assert all(e.triplet == profile.min_triplet for e in throttled)


class TestSimulate:

    def test_one_trace_without_samples(self, profile, graphs):
        traces = simulate(graphs["resnet18"], profile, _policy("sparse_dvfs_lookahead"), CFG,
                          _start(profile))
        assert len(traces) == 1
        assert traces[0].sample_index is None

    def test_one_trace_per_sample(self, profile, graphs, fixtures_dir):
        samples = load_trace(fixtures_dir / "traces" / "resnet18_relu.json")
        policy = _policy("sparse_dvfs_lookahead")
        traces = simulate(graphs["resnet18"], profile, policy, CFG, _start(profile), samples)
        static = run_policy(graphs["resnet18"], profile, policy, CFG, _start(profile))

        assert [t.sample_index for t in traces] == [0, 1, 2, 3]
        assert traces[1].total_energy == static.total_energy
        assert traces[3].makespan < traces[0].makespan

    def test_amortized_keeps_schedule(self, profile, graphs, fixtures_dir):
        samples = load_trace(fixtures_dir / "traces" / "resnet18_relu.json")
        traces = simulate(graphs["resnet18"], profile, _policy("sparse_dvfs_lookahead"), CFG,
                          _start(profile), samples, amortized=True)
        block_triplets = [tuple(e.triplet for e in t.events if e.kind is EventKind.BLOCK_EXEC)
                          for t in traces]
        assert len(set(block_triplets)) == 1

    def test_concatenation_adds_makespans(self, profile, graphs, fixtures_dir):
        samples = load_trace(fixtures_dir / "traces" / "resnet18_relu.json")
        traces = simulate(graphs["resnet18"], profile, _policy("max_static"), CFG,
                          _start(profile), samples)
        combined = ExecutionTrace.concatenate(traces)

        assert combined.makespan == pytest.approx(sum(t.makespan for t in traces))
        assert combined.total_energy == pytest.approx(sum(t.total_energy for t in traces))
        _assert_timeline_close(combined)

    def test_concatenation_renumbers_block_energies(self, profile, graphs, fixtures_dir):
        samples = load_trace(fixtures_dir / "traces" / "resnet18_relu.json")
        traces = simulate(graphs["resnet18"], profile, _policy("max_static"), CFG,
                          _start(profile), samples)
        combined = ExecutionTrace.concatenate(traces)

        assert combined.block_count == sum(t.block_count for t in traces)
        assert set(combined.block_energies) == set(range(combined.block_count))
        assert sum(combined.block_energies.values()) == pytest.approx(
            sum(sum(t.block_energies.values()) for t in traces))
        first = traces[0].block_count
        assert combined.block_energies[first] == traces[1].block_energies[0]

    def test_concatenate_nothing(self):
        with pytest.raises(SimulationError):
            ExecutionTrace.concatenate([])


def _assert_timeline_close(trace):
    for a, b in zip(trace.events, trace.events[1:]):
        assert b.t_start == pytest.approx(a.t_end, abs=1e-12)
    assert trace.makespan == pytest.approx(trace.events[-1].t_end)


class TestSustained:

    def test_frame_metrics(self, profile, graphs):
        report = simulate_sustained(graphs["resnet18"], profile, _policy("max_static"), CFG,
                                    _start(profile), duration=0.5)
        summary = report.metrics.get_summary()

        assert report.inferences == summary["inferences"]
        assert report.trace.makespan >= 0.5
        assert summary["frame_time_ms"]["mean"] == pytest.approx(
            report.trace.makespan * 1000.0 / report.inferences)
        assert summary["energy_j"]["mean"] * report.inferences == pytest.approx(
            report.trace.total_energy)
        _assert_timeline(report.trace)

    def test_duration_must_be_positive(self, profile, graphs):
        with pytest.raises(SimulationError):
            simulate_sustained(graphs["resnet18"], profile, _policy("max_static"), CFG,
                               _start(profile), duration=0.0)


class TestMetrics:

    def test_identical_traces(self):
        assert energy_efficiency_gain(_trace(2.0, 1.0), _trace(2.0, 1.0)) == 0.0

    def test_half_energy(self):
        assert energy_efficiency_gain(_trace(1.0, 1.0), _trace(2.0, 1.0)) == 50.0

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaselineEnergyError):
            energy_efficiency_gain(_trace(1.0, 1.0), _trace(0.0, 1.0))

    def test_cost_gain_equal_latency(self):
        assert cost_gain_ratio(_trace(1.0, 1.0), _trace(2.0, 1.0)) == 0.0

    def test_cost_gain_arithmetic(self):
        assert cost_gain_ratio(_trace(1.0, 1.1), _trace(2.0, 1.0)) == pytest.approx(20.0)

    def test_cost_gain_needs_positive_gain(self):
        with pytest.raises(NonPositiveGainError):
            cost_gain_ratio(_trace(2.0, 1.0), _trace(2.0, 1.0))
        with pytest.raises(NonPositiveGainError):
            cost_gain_ratio(_trace(3.0, 1.0), _trace(2.0, 1.0))

    def test_policy_sandwich(self, profile, graphs):
        for graph in graphs.values():
            fastest = run_policy(graph, profile, _policy("max_static"), CFG, _start(profile))
            sparse = run_policy(graph, profile, _policy("sparse_dvfs_lookahead"), CFG,
                                _start(profile))
            assert fastest.makespan <= sparse.makespan
            assert sparse.total_energy <= fastest.total_energy


class TestSweep:

    def test_infinite_n_is_one_block(self, profile, graphs):
        for graph in graphs.values():
            rows = sweep_n(graph, profile, _policy("sparse_dvfs_lookahead"), [math.inf], CFG,
                           _start(profile))
            assert rows[0].block_count == 1
            assert rows[0].switch_stall == 0.0

    def test_rows_follow_input_order(self, profile, graphs):
        rows = sweep_n(graphs["resnet101"], profile, _policy("sparse_dvfs_lookahead"),
                       [10, 1, 5], CFG, _start(profile))
        assert [r.n_factor for r in rows] == [10.0, 1.0, 5.0]
        assert rows[0].to_dict()["n"] == 10.0

    def test_empty_and_invalid_values(self, profile, graphs):
        with pytest.raises(SimulationError):
            sweep_n(graphs["resnet18"], profile, _policy("sparse_dvfs_lookahead"), [], CFG,
                    _start(profile))
        with pytest.raises(SimulationError):
            sweep_n(graphs["resnet18"], profile, _policy("sparse_dvfs_lookahead"), [0], CFG,
                    _start(profile))


class TestAblation:

    def _blocks(self, profile, graph, **switches):
        return plan_schedule(graph, profile, _policy("sparse_dvfs_lookahead", **switches),
                             CFG, 25.0).blocks

    def test_without_memory_coordination_emc_stays_at_top(self, profile, graphs):
        top = profile.mem_levels[-1]
        partitioned = partition(graphs["vit_b16"], profile, CFG, 25.0)
        blocks = self._blocks(profile, graphs["vit_b16"], memory_coordination=False)

        assert all(b.f_block.f_mem == top for b in blocks)
        assert [b.f_block.f_cpu for b in blocks] == [b.f_block.f_cpu for b in partitioned.blocks]
        assert [b.op_ids for b in blocks] == [b.op_ids for b in partitioned.blocks]

    def test_memory_coordination_lowers_some_emc_levels(self, profile, graphs):
        graph = graphs["vit_b16"]
        uncoordinated = self._blocks(profile, graph, memory_coordination=False)
        coordinated = self._blocks(profile, graph)

        for plain, fused in zip(uncoordinated, coordinated):
            assert fused.f_block == coordinate_memory(plain, profile)
            assert fused.t_block <= plain.t_block
        assert any(b.f_block.f_mem < profile.mem_levels[-1] for b in coordinated)
        assert any(coordinate_memory(b, profile) != b.f_block for b in uncoordinated)

    def test_without_race_to_submit_cpu_idles_low(self, profile, graphs):
        graph = graphs["vit_b16"]
        blocks = self._blocks(profile, graph, race_to_submit=False, memory_coordination=False)
        trace = run_policy(graph, profile, _policy("sparse_dvfs_lookahead", race_to_submit=False),
                           CFG, _start(profile))

        assert all(b.f_block.f_cpu == profile.cpu_levels[0] for b in blocks)
        assert not any(e.kind is EventKind.CPU_BOOST for e in trace.events)

    def test_fuse_block_keeps_unchanged_block(self, profile):
        op = Operator("a", OperatorKind.ACTIVATION, w_comp=8e6, d_mem=64e6,
                      s_comp=0.5, s_mem=0.5, structured=True)
        block = make_block([op], profile.min_triplet.replace(f_mem=profile.mem_levels[-1]),
                           profile)
        policy = _policy("sparse_dvfs_serial", race_to_submit=False, memory_coordination=False)
        assert fuse_block(block, policy, profile) is block

    def test_energy_falls_with_each_switch(self, profile, graphs):
        energies = {}
        for label, policy in ablation_policies(_policy("sparse_dvfs_lookahead")).items():
            energies[label] = run_policy(graphs["vit_b16"], profile, policy, CFG,
                                         _start(profile)).total_energy
        assert list(energies) == ["sparse_dvfs_lookahead/gpu_only",
                                  "sparse_dvfs_lookahead/cpu_lock",
                                  "sparse_dvfs_lookahead/fuse"]
        gpu_only, cpu_lock, fuse = energies.values()
        assert fuse < cpu_lock < gpu_only

    def test_variants_only_change_switches(self):
        base = _policy("sparse_dvfs_serial", lead=0.001)
        variants = ablation_policies(base)
        assert {(p.race_to_submit, p.memory_coordination) for p in variants.values()} == {
            (False, False), (True, False), (True, True)}
        assert all(p.kind is base.kind and p.lead == base.lead for p in variants.values())

    def test_rejects_non_sparse_policy(self):
        with pytest.raises(SimulationError, match="max_static"):
            ablation_policies(_policy("max_static"))


class TestScenario:

    def test_paths_resolve_relative_to_file(self, scenario_path):
        scenario = load_scenario(scenario_path("resnet18"))
        assert scenario.graph_path.resolve().name == "resnet18.json"
        assert scenario.graph_path.exists()
        assert scenario.policy.kind is PolicyKind.SPARSE_DVFS_LOOKAHEAD
        assert scenario.baseline is PolicyKind.REACTIVE_DEFAULT
        assert len(scenario.compare_policies) == 6
        assert scenario.sweep_values == [1.0, 2.0, 5.0, 10.0]

    def test_profile_overrides_applied(self, scenario_path):
        scenario = load_scenario(scenario_path("lookahead_resnet101"))
        _, profile, samples = scenario.load_inputs()
        assert profile.t_switch_matrix is not None
        assert samples is None
        assert scenario.policy.lead == 0.00065

    def test_thermal_section(self, scenario_path):
        scenario = load_scenario(scenario_path("sustained_resnet18"))
        assert scenario.throttle_limit == 70.0
        assert scenario.sustained_duration == 10.0

    def test_policy_for_keeps_knobs(self, scenario_path):
        scenario = load_scenario(scenario_path("lookahead_resnet18"))
        serial = scenario.policy_for("sparse_dvfs_serial")
        assert serial.kind is PolicyKind.SPARSE_DVFS_SERIAL
        assert serial.lead == scenario.policy.lead

    def test_missing_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"profile": "p.json"}))
        with pytest.raises(ScenarioError, match="graph"):
            load_scenario(path)

    def test_unknown_policy(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"graph": "g.json", "profile": "p.json",
                                    "policy": {"kind": "performance"}}))
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="absent"):
            load_scenario(tmp_path / "absent.json")
