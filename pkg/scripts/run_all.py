"""Run every CLI command on the shipped configs, writing under ``out/``."""

import sys
from pathlib import Path

from regime_futures.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

RUNS = [
    ("ce", "ce_curves.yaml"),
    ("phi", "ce_curves.yaml"),
    ("price", "gbm_two_regime.yaml"),
    ("strategy", "gbm_two_regime.yaml"),
    ("simulate", "gbm_two_regime.yaml"),
    ("price", "xou_two_regime.yaml"),
    ("strategy", "xou_two_regime.yaml"),
    ("simulate", "xou_two_regime.yaml"),
]

if __name__ == "__main__":
    status = 0
    for command, name in RUNS:
        code = main([command, "--config", str(CONFIGS / name)])
        print(f"{command:9s} {name:18s} exit {code}")
        status = max(status, code)
    sys.exit(status)
