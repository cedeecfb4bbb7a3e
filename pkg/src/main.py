"""
SparseDVFS toolkit - entry point

Loads tool-wide defaults from config.json, sets up logging and dispatches to
the command-line interface.

Usage:
    python src/main.py partition --graph fixtures/graphs/resnet18.json \
        --profile fixtures/profiles/orin_nano.json --n 5
    python src/main.py compare --scenario fixtures/scenarios/resnet18.json
"""
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import cli
from utils.logger import set_console_level, setup_app_logging

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config.json"


def _section(**defaults):
    return field(default_factory=lambda: dict(defaults))


@dataclass
class ToolkitConfig:
    """Tool-wide defaults; scenario files and flags override them"""
    config_path: Optional[Path] = None
    partition: dict = _section(n_factor=5.0, similarity_eps=0.05, latency_budget=None)
    governor: dict = _section(baseline="reactive_default",
                              sweep_n=[1, 2, 5, 10])
    simulation: dict = _section(t0=None, thermal_tick=None, dp_max_ops=512)
    logging: dict = _section(log_metrics=False, log_dir="logs", json_output=False)

    @classmethod
    def load(cls, config_path: Optional[Path] = None):
        """Load configuration from JSON file; missing keys keep defaults"""
        config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
        config = cls(config_path=config_path)
        if not config_path.exists():
            return config
        with open(config_path, 'r') as f:
            data = json.load(f)
        for section, values in data.items():
            if not hasattr(config, section) or section == "config_path":
                raise ValueError(f"{config_path}: unknown config section '{section}'")
            getattr(config, section).update(values)
        return config

    def save(self):
        """Save configuration to JSON file"""
        data = {
            'partition': self.partition,
            'governor': self.governor,
            'simulation': self.simulation,
            'logging': self.logging
        }
        with open(self.config_path, 'w') as f:
            json.dump(data, f, indent=2)

    @property
    def partition_n(self) -> float:
        return float(self.partition["n_factor"])

    @property
    def partition_eps(self) -> float:
        return float(self.partition["similarity_eps"])

    @property
    def latency_budget(self) -> Optional[float]:
        return self.partition.get("latency_budget")

    def t0(self, profile) -> float:
        value = self.simulation.get("t0")
        return profile.t_ambient if value is None else float(value)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = cli.build_parser()
    known, _ = parser.parse_known_args(argv) if argv else (None, None)

    config = ToolkitConfig.load(getattr(known, "config", None))

    if getattr(known, "verbose", False):
        set_console_level(logging.DEBUG)
    elif getattr(known, "quiet", False):
        set_console_level(logging.WARNING)

    log_dir = Path(config.logging['log_dir']) if config.logging.get('log_metrics') else None
    logger = setup_app_logging(log_dir=log_dir,
                               json_output=bool(config.logging.get('json_output')))
    logger.debug("SparseDVFS toolkit starting", argv=" ".join(argv),
                 config=str(config.config_path))

    return cli.run(argv, config)


if __name__ == "__main__":
    sys.exit(main())
