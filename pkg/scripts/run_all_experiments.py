#!/usr/bin/env python3
"""Drive every experiment family with the bundled configs.

Writes each experiment's CSVs and manifest into out/<name>/ and prints
a one-line status per family.  Useful as a smoke check of the full CLI
surface; the quantitative gate lives in tests/test_acceptance.py.
"""

import sys
from pathlib import Path

from axicyl.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

EXPERIMENTS = [
    ("run", "energy_budget.cfg"),
    ("run", "smoke_large_swirl.cfg"),
    ("run", "monotone_max_principle.cfg"),
    ("mms", "mms.cfg"),
    ("semigroup", "semigroup.cfg"),
    ("picard", "picard.cfg"),
    ("sweep-eps", "eps_sweep.cfg"),
    ("inequalities", "inequalities.cfg"),
]


def run_all(out_root: Path) -> int:
    worst = 0
    for command, cfg_name in EXPERIMENTS:
        name = cfg_name.removesuffix(".cfg")
        out_dir = out_root / name
        code = main(
            [command, "--config", str(CONFIGS / cfg_name), "--out", str(out_dir)]
        )
        print(f"{command:<13} {cfg_name:<28} exit={code}  -> {out_dir}/manifest.json")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out"
    sys.exit(run_all(out_root))
