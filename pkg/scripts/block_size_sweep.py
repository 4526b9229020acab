#!/usr/bin/env python3
"""Sweep the coding block size on the butterfly topology.

Reproduces the throughput-vs-block-size shape: delivery peaks at an
intermediate block size and drops again for larger generations.

Usage: python3 scripts/block_size_sweep.py [--out DIR] [--seeds N] [--serial]
"""

import argparse
from pathlib import Path

from bpnc import channel, engine


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/block_size_sweep")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--values", default="2,4,6,8")
    ap.add_argument("--serial", action="store_true",
                    help="run in-process instead of a worker pool")
    args = ap.parse_args()

    values = [int(v) for v in args.values.split(",")]
    rows = engine.sweep(channel.butterfly7(), "block_size", values,
                        seeds=list(range(1, args.seeds + 1)),
                        parallel=not args.serial)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    engine.write_sweep_csv(rows, out / "sweep.csv")
    for r in rows:
        print(f"h={r['value']}: delivered {r['delivered_mean']:.1f} "
              f"± {r['delivered_std']:.1f} over {r['runs']} seeds")
    print(f"wrote {out / 'sweep.csv'}")


if __name__ == "__main__":
    main()
