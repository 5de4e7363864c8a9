#!/usr/bin/env python3
"""Run the Hamilton-cycle construction once and pretty-print the phase log.

    python scripts/pipeline_demo.py [n] [seed]
"""
import json
import sys

from hamcount.digraph import couple, gen_process
from hamcount.frieze import PipelineConfig, compute_constants, find_hamilton


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    cp = couple(gen_process(n, "loopful", seed))
    out = find_hamilton(cp, compute_constants(n), seed=seed,
                        config=PipelineConfig(include_timings=True))
    print(json.dumps(out.phase_log, indent=2, sort_keys=True))
    if out.ok:
        print(f"\nHamilton cycle found; overlap with the initial factor: "
              f"{out.overlap}/{n}")
        print(" ".join(map(str, out.cycle[:30])), "..." if n > 30 else "")
    else:
        print(f"\nfailed at {out.failure_phase}: {out.failure_reason}")
        sys.exit(1)


if __name__ == "__main__":
    main()
