#!/usr/bin/env python3
"""Run every builtin topology and write metrics/summary/packet-log outputs.

Usage: python3 scripts/run_topologies.py [--out DIR] [--seed N] [--duration S]
"""

import argparse
from pathlib import Path

from bpnc import channel, engine


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/topologies")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--duration", type=float, default=600.0)
    args = ap.parse_args()

    for name, factory in channel.BUILTINS.items():
        eng = engine.run(factory(), seed=args.seed, duration_s=args.duration)
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        engine.write_outputs(eng, out)
        s = eng.log.summary
        print(f"{name}: injected={sum(s['injected'].values())} "
              f"delivered={sum(s['delivered'].values())} -> {out}")


if __name__ == "__main__":
    main()
