"""
Shared pytest fixtures: bundled fixture files and small synthetic profiles
"""
import os
import sys
from pathlib import Path

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from device import load_profile, profile_from_dict  # noqa: E402
from graph import load_graph  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
FIXTURE_GRAPHS = ["resnet18", "resnet101", "vit_b16", "vit_l16"]


def _key(f: float) -> str:
    return f"{f:.0f}"


def synthetic_profile_dict(cpu=(1e9,), gpu=(1e9,), mem=(1e9,), **overrides) -> dict:
    """
    Minimal valid profile: peak FLOP/s equals f_gpu, bandwidth equals f_mem
    bytes/s, every voltage 1 V, no overhead and no prefill window.
    """
    data = {
        "name": "synthetic",
        "cpu_levels": list(cpu),
        "gpu_levels": list(gpu),
        "mem_levels": list(mem),
        "peak_perf": {f"{_key(c)}/{_key(g)}": g for c in cpu for g in gpu},
        "mem_bandwidth": {_key(m): m for m in mem},
        "voltage": {
            "cpu": {_key(c): 1.0 for c in cpu},
            "gpu": {_key(g): 1.0 for g in gpu},
            "mem": {_key(m): 1.0 for m in mem},
        },
        "t_overhead": 0.0,
        "t_switch_base": 0.001,
        "alpha_max": {"cpu": 1e-9, "gpu": 1e-9, "mem": 1e-9},
        "alpha_min": {"cpu": 1e-9, "gpu": 1e-9, "mem": 1e-9},
        "k1": 0.01,
        "k2": 0.5,
        "r_th": 5.0,
        "tau_th": 1.0,
        "t_ambient": 25.0,
        "t_prefill": 0.0,
    }
    data.update(overrides)
    return data


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def profile():
    """Calibrated Orin Nano class profile"""
    return load_profile(FIXTURES / "profiles" / "orin_nano.json")


@pytest.fixture(scope="session")
def graphs():
    return {name: load_graph(FIXTURES / "graphs" / f"{name}.json") for name in FIXTURE_GRAPHS}


@pytest.fixture(scope="session")
def alternating():
    return load_graph(FIXTURES / "graphs" / "alternating_phases.json")


@pytest.fixture
def make_profile():
    """Factory for synthetic profiles; keyword arguments override fields"""
    def factory(**kwargs):
        return profile_from_dict(synthetic_profile_dict(**kwargs))
    return factory


@pytest.fixture
def scenario_path():
    def path(name: str) -> Path:
        return FIXTURES / "scenarios" / f"{name}.json"
    return path
