"""Write a seeded synthetic traceroute file plus a run config over the corpus world.

    python3 scripts/make_synthetic_corpus.py --n 10000 --out /tmp/synth
    python3 scripts/make_synthetic_corpus.py --n 10000 --out /tmp/synth --time --parallel 1 2 4

With ``--time`` the analyze stage is run once per ``--parallel`` value and
wall-clock throughput is printed.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

HERE = os.path.dirname(os.path.abspath(__file__))
TESTS = os.path.join(HERE, "..", "tests")
CORPUS = os.path.abspath(os.path.join(TESTS, "fixtures", "corpus"))
sys.path.insert(0, TESTS)

import synth  # noqa: E402

DATA_FILES = {
    "probes": "probes.jsonl", "geo": "geo.csv", "pfx2as": "pfx2as.tsv", "anycast": "anycast.csv",
    "hint_rules": "hints.txt", "hostnames": "hostnames.csv", "bgp_snapshots": "bgp.tsv",
    "probe_location_boxes": "probe_boxes.csv",
}


def write_config(out_dir: str, traces: str) -> str:
    lines = ["version = 1", f'output_dir = "{os.path.join(out_dir, "out")}"', "", "[inputs]",
             f'traceroutes = ["{traces}"]']
    lines += [f'{key} = "{os.path.join(CORPUS, name)}"' for key, name in DATA_FILES.items()]
    lines += ["", "[sanitize]", f'excluded_probes = "{os.path.join(CORPUS, "excluded_probes.txt")}"']
    path = os.path.join(out_dir, "run.toml")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True)
    ap.add_argument("--time", action="store_true", help="run analyze and report throughput")
    ap.add_argument("--parallel", type=int, nargs="+", default=[1])
    args = ap.parse_args()

    out = os.path.abspath(args.out)
    os.makedirs(out, exist_ok=True)
    traces = os.path.join(out, "traceroutes.jsonl")
    synth.write_jsonl(traces, args.n, args.seed)
    cfg = write_config(out, traces)
    print(f"wrote {args.n} traceroutes to {traces}")
    print(f"config: {cfg}")
    if not args.time:
        return 0

    from citm.cli import main as citm_main

    for workers in args.parallel:
        start = time.perf_counter()
        citm_main(["analyze", "--config", cfg, "--out", os.path.join(out, f"out-p{workers}"),
                   "--parallel", str(workers)])
        elapsed = time.perf_counter() - start
        print(f"parallel={workers}: {elapsed:.2f}s, {args.n / elapsed:.0f} paths/s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
