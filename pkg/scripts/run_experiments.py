#!/usr/bin/env python3
"""Run every experiment config under scripts/configs/ and print a summary.

Reports land next to each config as <name>.report.json.  Exit code is the
number of failed experiments (0 when everything passes its thresholds).
Note that hitting_time_n10000 fails its 90% bracket threshold by design of
the underlying asymptotics; see README.
"""
import json
import pathlib
import sys
import time

from hamcount.harness import ExperimentConfig, run_experiment

CONFIG_DIR = pathlib.Path(__file__).resolve().parent / "configs"


def main(argv):
    only = set(argv[1:])
    failures = 0
    for cfg_path in sorted(CONFIG_DIR.glob("*.json")):
        if only and cfg_path.stem not in only:
            continue
        cfg = ExperimentConfig.from_dict(json.loads(cfg_path.read_text()))
        t0 = time.time()
        report = run_experiment(cfg)
        elapsed = time.time() - t0
        out = cfg_path.with_suffix(".report.json")
        out.write_text(report.to_json() + "\n")
        status = "pass" if report.passed else "FAIL"
        print(f"{cfg_path.stem:32s} {status}  ({elapsed:6.1f}s)  -> {out.name}")
        failures += 0 if report.passed else 1
    return failures


if __name__ == "__main__":
    sys.exit(main(sys.argv))
