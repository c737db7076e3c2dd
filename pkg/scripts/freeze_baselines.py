#!/usr/bin/env python3
"""Regenerate the pinned regression values under tests/data/.

Runs the continuity ladder for the bump-vs-plain pair and stores the
sup-distance of the relative trace at each cap size.  The test suite compares
future runs against these values bit-for-bit modulo a small tolerance, so this
script should only be re-run after an intentional algorithm change, followed
by a manual audit of the new numbers.

Usage::

    python3 scripts/freeze_baselines.py
"""
from __future__ import annotations

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from relspec.cli import CONTINUITY_EPSILONS, ScenarioConfig, run_scenario


def main() -> int:
    root = pathlib.Path(__file__).resolve().parent.parent
    cfg = ScenarioConfig.from_json(root / "configs" / "continuity.json")
    out = root / "out" / "freeze-continuity"
    report = run_scenario(cfg, out)
    if report.failed_stage is not None:
        print(f"scenario failed at stage {report.failed_stage}: {report.error}", file=sys.stderr)
        return 1

    rows = {}
    with open(out / "continuity.csv", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            rec = dict(zip(header, line.strip().split(",")))
            rows[float(rec["epsilon"])] = float(rec["dsup"])

    data = {
        "description": "sup_t |relative trace at cap size eps - baseline| for the bump-vs-plain pair",
        "config": "configs/continuity.json",
        "epsilons": list(CONTINUITY_EPSILONS),
        "dsup": [rows[e] for e in CONTINUITY_EPSILONS],
    }
    target = root / "tests" / "data" / "continuity_baseline.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {target}")
    for eps, val in zip(data["epsilons"], data["dsup"]):
        print(f"  eps={eps:<5g} dsup={val!r}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
