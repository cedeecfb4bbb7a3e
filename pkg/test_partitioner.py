#!/usr/bin/env python3
"""
Tests for super-block partitioning, switching accounting and the DP oracle
"""
import json
import math

import numpy as np
import pytest

from device import FrequencyTriplet
from graph import ComputationGraph, Operator, OperatorKind, random_graph
from modeler import block_exec_time, optimal_triplet, predict_energy
from partitioner import (PartitionConfig, PartitionError, PartitionSizeError, Schedule,
                         dp_optimal_partition, make_block, operator_level_schedule,
                         partition, save_schedule, schedule_energy, schedule_to_dict,
                         similar, switching_totals, transition_energy)

DENSE = dict(kind=OperatorKind.CONV, w_comp=300e6, d_mem=6e6)
SPARSE = dict(kind=OperatorKind.ACTIVATION, w_comp=8e6, d_mem=64e6, s_comp=0.5,
              s_mem=0.5, structured=True)


def chain(*specs, name="hand"):
    operators = tuple(Operator(id=f"op{i}", **spec) for i, spec in enumerate(specs))
    edges = tuple((a.id, b.id) for a, b in zip(operators, operators[1:]))
    return ComputationGraph(name=name, operators=operators, edges=edges)


class TestPartitionConfig:

    def test_defaults(self):
        cfg = PartitionConfig()
        assert cfg.n_factor == 5.0
        assert cfg.similarity_eps == 0.05
        assert cfg.latency_budget is None

    def test_from_dict_short_keys(self):
        cfg = PartitionConfig.from_dict({"n": "inf", "eps": 0.1, "budget": 0.02})
        assert math.isinf(cfg.n_factor)
        assert cfg.similarity_eps == 0.1
        assert cfg.latency_budget == 0.02
        assert PartitionConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("kwargs", [
        {"n_factor": 0.0}, {"n_factor": -1.0}, {"similarity_eps": -0.01},
        {"latency_budget": 0.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(PartitionError):
            PartitionConfig(**kwargs)


class TestSimilar:

    def test_identical(self, profile):
        assert similar(profile.max_triplet, profile.max_triplet, 0.0)

    def test_within_tolerance(self):
        a = FrequencyTriplet(1e9, 612e6, 2133e6)
        b = FrequencyTriplet(1e9, 624e6, 2133e6)
        assert similar(a, b, 0.02)
        assert not similar(a, b, 0.01)

    def test_every_component_must_match(self):
        a = FrequencyTriplet(1e9, 612e6, 204e6)
        b = FrequencyTriplet(1e9, 612e6, 2133e6)
        assert not similar(a, b, 0.05)


class TestPartition:

    def test_single_operator(self, profile):
        graph = chain(DENSE)
        schedule = partition(graph, profile, PartitionConfig(), 25.0)

        assert len(schedule) == 1
        assert schedule.blocks[0].f_block == optimal_triplet(graph.operators[0], 25.0, profile)

    def test_uniform_optimum_is_one_block(self, profile):
        schedule = partition(chain(DENSE, DENSE, DENSE, DENSE), profile,
                             PartitionConfig(n_factor=1.0), 25.0)
        assert len(schedule) == 1

    def test_long_dissimilar_operators_split(self, profile):
        graph = chain(DENSE, SPARSE)
        f_dense, f_sparse = (optimal_triplet(op, 25.0, profile) for op in graph.operators)
        assert not similar(f_sparse, f_dense, 0.05)

        schedule = partition(graph, profile, PartitionConfig(n_factor=1.0), 25.0)

        assert [b.op_ids for b in schedule.blocks] == [["op0"], ["op1"]]
        assert [b.f_block for b in schedule.blocks] == [f_dense, f_sparse]

    def test_short_middle_operator_absorbed_at_componentwise_max(self, profile):
        graph = chain(DENSE, SPARSE, DENSE)
        f_dense, f_sparse, _ = (optimal_triplet(op, 25.0, profile) for op in graph.operators)

        schedule = partition(graph, profile, PartitionConfig(n_factor=5.0), 25.0)

        assert len(schedule) == 1
        assert schedule.blocks[0].f_block == f_dense.componentwise_max(f_sparse)
        assert schedule.blocks[0].f_block == FrequencyTriplet(268.8e6, 408e6, 2133e6)

    def test_candidate_not_counted_in_amortization_check(self, profile):
        # op1 starts a new block; op2 joins it because op1 alone is short
        graph = chain(DENSE, SPARSE, DENSE)
        f_dense, f_sparse, _ = (optimal_triplet(op, 25.0, profile) for op in graph.operators)

        schedule = partition(graph, profile, PartitionConfig(n_factor=1.0), 25.0)

        assert [b.op_ids for b in schedule.blocks] == [["op0"], ["op1", "op2"]]
        assert schedule.blocks[1].f_block == f_dense.componentwise_max(f_sparse)

    def test_block_time_is_recomputed_at_block_triplet(self, profile):
        schedule = partition(chain(DENSE, SPARSE, DENSE), profile, PartitionConfig(), 25.0)
        block = schedule.blocks[0]
        assert block.t_block == block_exec_time(block.ops, block.f_block, profile)

    @pytest.mark.parametrize("name,blocks", [
        ("resnet18", 2), ("resnet101", 16), ("vit_b16", 8), ("vit_l16", 12),
    ])
    def test_fixture_block_counts(self, profile, graphs, name, blocks):
        schedule = partition(graphs[name], profile, PartitionConfig(n_factor=5.0), 25.0)
        assert len(schedule) == blocks

    def test_block_counts_non_increasing_in_n(self, profile, graphs):
        for graph in graphs.values():
            counts = [len(partition(graph, profile, PartitionConfig(n_factor=n), 25.0))
                      for n in (1, 2, 5, 10)]
            assert counts == sorted(counts, reverse=True), graph.name

    def test_infinite_n_is_one_block(self, profile, graphs):
        for graph in graphs.values():
            schedule = partition(graph, profile, PartitionConfig(n_factor=math.inf), 25.0)
            assert len(schedule) == 1

    @pytest.mark.parametrize("name,ratio", [("resnet18", 7.0), ("vit_b16", 8.5)])
    def test_switching_reduction(self, profile, graphs, name, ratio):
        graph = graphs[name]
        cfg = PartitionConfig()
        block_level = switching_totals(partition(graph, profile, cfg, 25.0), profile)
        operator_level = switching_totals(operator_level_schedule(graph, profile, cfg, 25.0),
                                          profile)
        assert operator_level / block_level >= ratio

    def test_random_graph_properties(self, profile):
        """Coverage, amortization guard, conservative merge and determinism"""
        rng = np.random.default_rng(2024)
        cfg = PartitionConfig()
        threshold = cfg.n_factor * profile.t_switch_base
        for index in range(500):
            graph = random_graph(rng, int(rng.integers(1, 65)), name=f"random_{index}")
            schedule = partition(graph, profile, cfg, 25.0)

            assert schedule.op_ids == graph.op_ids
            for block in schedule.blocks[:-1]:
                assert block.t_block >= threshold
            for block in schedule.blocks:
                merged = block.member_optima[0]
                for f in block.member_optima[1:]:
                    merged = merged.componentwise_max(f)
                assert block.f_block == merged

            everything = partition(graph, profile, PartitionConfig(n_factor=math.inf), 25.0)
            assert len(everything) == 1
            if index % 10 == 0:
                assert partition(graph, profile, cfg, 25.0) == schedule


class TestSwitchingAccounting:

    def _schedule(self, profile, gpu_levels):
        base = profile.min_triplet
        op = Operator("x", **DENSE)
        blocks = tuple(make_block([op], base.replace(f_gpu=g), profile) for g in gpu_levels)
        return Schedule(blocks=blocks, graph_name="manual")

    def test_single_block_has_no_switching(self, profile):
        assert switching_totals(self._schedule(profile, [408e6]), profile) == 0.0

    def test_constant_latency_transitions(self, profile):
        schedule = self._schedule(profile, [408e6, 510e6, 612e6, 510e6])
        assert switching_totals(schedule, profile) == pytest.approx(3 * 0.007)

    def test_operator_level_schedule(self, profile, graphs):
        graph = graphs["resnet18"]
        schedule = operator_level_schedule(graph, profile, PartitionConfig(), 25.0)
        assert len(schedule) == len(graph)
        assert schedule.op_ids == graph.op_ids

    def test_schedule_energy_charges_distinct_boundaries_only(self, profile):
        same = self._schedule(profile, [408e6, 408e6])
        op_energy = predict_energy(same.blocks[0].ops[0], same.blocks[0].f_block, 25.0, profile)
        assert schedule_energy(same, profile, 25.0) == pytest.approx(2 * op_energy)

        mixed = self._schedule(profile, [408e6, 510e6])
        expected = (predict_energy(mixed.blocks[0].ops[0], mixed.blocks[0].f_block, 25.0, profile)
                    + predict_energy(mixed.blocks[1].ops[0], mixed.blocks[1].f_block, 25.0, profile)
                    + transition_energy(mixed.blocks[1].f_block, 25.0, profile))
        assert schedule_energy(mixed, profile, 25.0) == pytest.approx(expected)


class TestDynamicProgramming:

    def test_never_worse_than_greedy(self, profile):
        rng = np.random.default_rng(11)
        cfg = PartitionConfig()
        for index in range(100):
            graph = random_graph(rng, int(rng.integers(1, 9)), name=f"dp_{index}")
            greedy = schedule_energy(partition(graph, profile, cfg, 25.0), profile, 25.0)
            oracle_schedule = dp_optimal_partition(graph, profile, cfg, 25.0)
            oracle = schedule_energy(oracle_schedule, profile, 25.0)

            assert oracle_schedule.op_ids == graph.op_ids
            assert oracle <= greedy * (1 + 1e-9)

    def test_adjacent_segments_have_distinct_triplets(self, profile, graphs):
        schedule = dp_optimal_partition(graphs["resnet18"], profile, PartitionConfig(), 25.0)
        for a, b in zip(schedule.blocks, schedule.blocks[1:]):
            assert a.f_block != b.f_block

    def test_single_operator_matches_optimum(self, profile):
        graph = chain(SPARSE)
        schedule = dp_optimal_partition(graph, profile, PartitionConfig(), 25.0)
        assert schedule.blocks[0].f_block == optimal_triplet(graph.operators[0], 25.0, profile)

    def test_budget_is_honoured(self, profile):
        graph = chain(DENSE, SPARSE, DENSE)
        cfg = PartitionConfig(latency_budget=0.0105)
        schedule = dp_optimal_partition(graph, profile, cfg, 25.0)
        for block in schedule.blocks:
            for op in block.ops:
                assert block_exec_time([op], block.f_block, profile) <= 0.0105

    def test_size_guard(self, profile):
        graph = random_graph(np.random.default_rng(0), 12)
        with pytest.raises(PartitionSizeError):
            dp_optimal_partition(graph, profile, PartitionConfig(), 25.0, max_ops=8)


class TestScheduleFile:

    def test_save_schedule(self, profile, graphs, tmp_path):
        schedule = partition(graphs["resnet18"], profile,
                             PartitionConfig(n_factor=math.inf), 25.0)
        path = tmp_path / "out" / "schedule.json"
        save_schedule(schedule, path)

        data = json.loads(path.read_text())
        assert data == schedule_to_dict(schedule)
        assert data["n"] == "inf"
        assert data["blocks"][0]["op_ids"] == graphs["resnet18"].op_ids
        assert not (tmp_path / "out" / "schedule.json.tmp").exists()
