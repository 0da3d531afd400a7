"""``citm`` command line: curate, select-probes, analyze, report, compare-protocols.

Exit codes: 0 success, 1 finished with analysis-level warnings, 2 bad
invocation or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Optional, Sequence

from . import config as configmod
from .config import ConfigError, RunConfig

EXIT_OK, EXIT_WARN, EXIT_USAGE = 0, 1, 2


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg.output_dir


def cmd_curate(cfg: RunConfig, args) -> int:
    from . import curate
    from .geodata import Pfx2AsIndex

    cfg.require("curate", "seeds", "suffix_table")
    cfg.require("inputs", "pfx2as")
    c = cfg.curate
    if args.sampling:
        c.sampling = args.sampling
    if c.live:
        provider = curate.CrtShProvider()
        resolver = curate.SocketResolver()
        prober = curate.SocketPortProber()
    else:
        cfg.require("curate", "cert_answers", "dns_answers", "port_answers")
        provider = curate.OfflineCertProvider(c.cert_answers)
        resolver = curate.OfflineResolver(c.dns_answers)
        prober = curate.OfflinePortProber(c.port_answers)

    suffixes = curate.SuffixTable.from_file(c.suffix_table)
    seeds, seed_errors = curate.load_seeds(c.seeds, suffixes)
    expanded = curate.expand_candidates(seeds, provider)
    pfx2as = Pfx2AsIndex.from_tsv(cfg.inputs.pfx2as)
    candidates = curate.check_all(expanded.candidates, resolver, prober, pfx2as, cfg.parallel)
    verdict_errors: list[str] = []
    if c.verdicts:
        with open(c.verdicts, newline="", encoding="utf-8") as fh:
            candidates, verdict_errors = curate.import_verdicts(candidates, fh)
    samples = curate.sample_by_country(candidates, c.sampling, c.target_cap, c.random_seed)

    out = _outdir(cfg)
    with open(os.path.join(out, "candidates.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(curate.CANDIDATE_FIELDS)
        w.writerows(curate.candidate_row(x) for x in candidates)
    with open(os.path.join(out, "review_queue.csv"), "w", newline="", encoding="utf-8") as fh:
        n_pending = curate.write_review_queue(candidates, fh)
    with open(os.path.join(out, "targets.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("country", "rank", "fqdn", "ip", "asn", "prefix"))
        for country, chosen in samples.items():
            for rank, t in enumerate(chosen, 1):
                w.writerow((country, rank, t.fqdn, t.primary_ip or "", "" if t.asn is None else t.asn, t.prefix or ""))
    log = seed_errors + expanded.log + verdict_errors
    with open(os.path.join(out, "curate_log.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in log)
    n_targets = sum(len(v) for v in samples.values())
    _info(f"curate: {len(candidates)} candidates, {n_pending} pending review, {n_targets} targets")
    return EXIT_WARN if log else EXIT_OK


def cmd_select_probes(cfg: RunConfig, args) -> int:
    from .curate import select_probes
    from .ingest import load_probes
    from .pipeline import sanitize_config, trusted_probes

    cfg.require("inputs", "probes")
    parsed = load_probes(cfg.inputs.probes)
    kept, dropped = trusted_probes(parsed.items, sanitize_config(cfg), cfg)
    selection = select_probes(kept, cfg.curate.probe_cap)
    asn = {p.probe_id: p.asn for p in kept}
    out = _outdir(cfg)
    with open(os.path.join(out, "probe_selection.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("country", "rank", "probe_id", "asn", "rationale"))
        for country, sel in selection.items():
            for rank, (pid, why) in enumerate(zip(sel.probe_ids, sel.rationale), 1):
                w.writerow((country, rank, pid, "" if asn[pid] is None else asn[pid], why))
    with open(os.path.join(out, "dropped_probes.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("probe_id", "country", "reason"))
        w.writerows((d.probe.probe_id, d.probe.country, d.reason) for d in dropped)
    for e in parsed.errors:
        _info(f"probes: {e}")
    _info(f"select-probes: {sum(len(s.probe_ids) for s in selection.values())} selected, {len(dropped)} dropped")
    return EXIT_WARN if parsed.errors else EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    from .pipeline import load_inputs, run_batch, write_outcomes

    if args.legacy_single_occurrence:
        cfg.sanitize.legacy_single_occurrence = True
    parallel = args.parallel or cfg.parallel
    loaded = load_inputs(cfg)
    for w in loaded.warnings:
        _info(f"warning: {w}")
    _info(f"analyze: {len(loaded.paths)} paths, {len(loaded.parse_errors)} parse errors, parallel={parallel}")
    outcomes = run_batch(
        loaded.paths, loaded.data, loaded.sanitize, loaded.validation, loaded.bgp_table, parallel, progress=True
    )
    out = _outdir(cfg)
    write_outcomes(
        outcomes,
        os.path.join(out, "analysis.jsonl"),
        os.path.join(out, "bgp_inference.jsonl") if loaded.bgp_table is not None else None,
    )
    with open(os.path.join(out, "parse_errors.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{e}\n" for e in loaded.parse_errors)
    n_warn = sum(o.warning for o in outcomes)
    n_err = sum(o.record["status"] == "error" for o in outcomes)
    _info(f"analyze: wrote {len(outcomes)} records ({n_err} errors, {n_warn} with warnings)")
    return EXIT_WARN if (n_warn or loaded.parse_errors or loaded.warnings) else EXIT_OK


def _load_analysis(cfg: RunConfig, args):
    from .report import load_analysis_file

    path = args.analysis or os.path.join(cfg.output_dir, "analysis.jsonl")
    if not os.path.exists(path):
        raise ConfigError(f"analysis file not found: {path}")
    return load_analysis_file(path)


def cmd_report(cfg: RunConfig, args) -> int:
    from .report import build_reports, emit

    analyses, dropped, n_errors = _load_analysis(cfg, args)
    rs = build_reports(analyses, dropped, tuple(cfg.report.citm_buckets), n_errors)
    out = _outdir(cfg)
    written = []
    for fmt in args.format or cfg.report.formats:
        written += emit(rs, fmt, out)
    _info(f"report: {len(written)} files for {len(rs.countries)} countries")
    return EXIT_WARN if n_errors else EXIT_OK


def cmd_compare_protocols(cfg: RunConfig, args) -> int:
    from .report import protocol_comparison, write_protocol_csvs

    analyses, _, _ = _load_analysis(cfg, args)
    rates, pairs = protocol_comparison(analyses)
    write_protocol_csvs(rates, pairs, _outdir(cfg))
    differing = sum(not p.citm_sets_equal for p in pairs)
    _info(f"compare-protocols: {len(pairs)} multi-protocol pairs, {differing} with differing CitM sets")
    return EXIT_OK


COMMANDS = {
    "curate": cmd_curate,
    "select-probes": cmd_select_probes,
    "analyze": cmd_analyze,
    "report": cmd_report,
    "compare-protocols": cmd_compare_protocols,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citm", description="Countries-in-the-middle path analysis")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (TOML); falls back to $CITM_CONFIG")
    common.add_argument("--out", help="override output_dir")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("curate", parents=[common], help="build per-country target lists and the review queue")
    p.add_argument("--sampling", choices=configmod.SAMPLING_MODES, help="override curate.sampling")
    sub.add_parser("select-probes", parents=[common], help="pick AS-diverse vantage points")
    p = sub.add_parser("analyze", parents=[common], help="sanitize and analyze traceroutes")
    p.add_argument("--parallel", type=int, help="worker processes")
    p.add_argument("--legacy-single-occurrence", action="store_true",
                   help="also strip hops whose country appears once in the path")
    for name in ("report", "compare-protocols"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--analysis", help="analysis.jsonl to read (default: <output_dir>/analysis.jsonl)")
        if name == "report":
            p.add_argument("--format", action="append", choices=("csv", "structured", "svg"))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    path = args.config or os.environ.get("CITM_CONFIG")
    try:
        if not path:
            raise ConfigError("no config given (use --config or CITM_CONFIG)")
        cfg = configmod.load(path)
        if args.out:
            cfg.output_dir = os.path.abspath(args.out)
        if getattr(args, "parallel", None) is not None and args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        _info(f"citm: error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _info(f"citm: error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
