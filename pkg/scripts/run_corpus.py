"""Run analyze, report and compare-protocols over the ground-truth corpus.

Prints every planted case with its observed outcome and flags any field
that differs from the hand-derived expectation.

    python3 scripts/run_corpus.py [--out DIR]
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
TESTS = os.path.join(HERE, "..", "tests")
sys.path.insert(0, TESTS)

import groundtruth  # noqa: E402
from conftest import CORPUS  # noqa: E402

from citm.cli import main as citm_main  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="output directory (default: a fresh temp dir)")
    args = ap.parse_args()
    out = args.out or tempfile.mkdtemp(prefix="citm-corpus-")
    cfg = os.path.join(CORPUS, "run.toml")

    codes = {}
    for cmd in (["analyze"], ["report", "--format", "csv", "--format", "structured", "--format", "svg"],
                ["compare-protocols"]):
        codes[cmd[0]] = citm_main([cmd[0], "--config", cfg, "--out", out, *cmd[1:]])

    records = groundtruth.read_jsonl(os.path.join(out, "analysis.jsonl"))
    expected = groundtruth.load_expected()
    bad = groundtruth.mismatches(records, expected)
    bad_ids = {b[0] for b in bad}
    by_id = {r["path_id"]: r for r in records}
    for pid, want in sorted(expected["paths"].items()):
        r = by_id.get(pid, {})
        if r.get("status") == "analyzed":
            got = f"{r['classification']:<10} citms={','.join(r['citms']) or '-':<8} {r['reach']}"
        else:
            got = r.get("status", "missing")
        print(f"{'!!' if pid in bad_ids else 'ok'} {want['name']:<26} {got}")
    bgp_bad = groundtruth.bgp_mismatches(groundtruth.read_jsonl(os.path.join(out, "bgp_inference.jsonl")), expected)

    print(f"\nexit codes: {codes}")
    print(f"{len(records)} records, {len(bad)} field mismatches, {len(bgp_bad)} BGP mismatches")
    for b in bad + bgp_bad:
        print("  ", b)
    print(f"outputs in {out}")
    return 1 if bad or bgp_bad else 0


if __name__ == "__main__":
    sys.exit(main())
