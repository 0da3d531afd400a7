"""Dataset loading and the batch sanitize -> analyze -> BGP runner."""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .analysis import SCHEMA_VERSION, AnalysisError, Datasets, PathAnalysis, ValidationConfig, analyze
from .bgp import BgpRouteTable, load_snapshots, match_incomplete, stable_routes
from .config import RunConfig
from .geodata import AnycastIndex, CountryPoints, GeoIndex, HintRules, Pfx2AsIndex, load_hostnames
from .ingest import ParseError, ProbeRecord, TraceroutePath, load_probes, load_traceroutes
from .sanitize import (
    BoxLocator,
    SanitizeConfig,
    default_bogons,
    default_squats,
    filter_probes,
    read_cidr_list,
    read_id_list,
    sanitize_path,
)


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class Loaded:
    data: Datasets
    paths: list[TraceroutePath]
    sanitize: SanitizeConfig
    validation: ValidationConfig
    bgp_table: Optional[BgpRouteTable] = None
    warnings: list[str] = field(default_factory=list)
    parse_errors: list[ParseError] = field(default_factory=list)


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.readlines()


def sanitize_config(cfg: RunConfig) -> SanitizeConfig:
    s = cfg.sanitize
    return SanitizeConfig(
        bogon_cidrs=read_cidr_list(_read_lines(s.bogons)) if s.bogons else default_bogons(),
        squat_cidrs=read_cidr_list(_read_lines(s.squats)) if s.squats else default_squats(),
        excluded_probe_ids=read_id_list(_read_lines(s.excluded_probes)) if s.excluded_probes else set(),
        excluded_fqdns=read_id_list(_read_lines(s.excluded_fqdns)) if s.excluded_fqdns else set(),
        legacy_single_occurrence_filter=s.legacy_single_occurrence,
    )


def trusted_probes(probes: Sequence[ProbeRecord], scfg: SanitizeConfig, cfg: RunConfig):
    locate = BoxLocator.from_csv(cfg.inputs.probe_location_boxes) if cfg.inputs.probe_location_boxes else None
    return filter_probes(probes, scfg, locate)


def rejected_fqdns(cfg: RunConfig) -> set[str]:
    if not cfg.curate.verdicts:
        return set()
    with open(cfg.curate.verdicts, newline="", encoding="utf-8") as fh:
        return {
            (row.get("fqdn") or "").strip().lower()
            for row in csv.DictReader(fh)
            if (row.get("verdict") or "").strip().lower() == "rejected"
        }


def load_inputs(cfg: RunConfig) -> Loaded:
    cfg.require("inputs", "traceroutes", "probes", "geo", "pfx2as")
    inp = cfg.inputs
    warnings: list[str] = []

    probe_parse = load_probes(inp.probes)
    warnings += [f"{inp.probes}: {e}" for e in probe_parse.errors]
    probes: list[ProbeRecord] = probe_parse.items

    scfg = sanitize_config(cfg)
    _, dropped = trusted_probes(probes, scfg, cfg)
    for d in dropped:
        scfg.excluded_probe_ids.add(d.probe.probe_id)
        scfg.exclusion_reasons[d.probe.probe_id] = d.reason
    for fqdn in sorted(rejected_fqdns(cfg)):
        scfg.excluded_fqdns.add(fqdn)
        scfg.exclusion_reasons[fqdn] = "review verdict: rejected"

    geo = GeoIndex.from_csv(inp.geo)
    points = CountryPoints.from_csv(inp.country_points) if inp.country_points else CountryPoints.bundled()
    missing = points.missing(geo.countries())
    if missing:
        warnings.append(f"country points missing for: {', '.join(sorted(missing))}")
    data = Datasets(
        geo=geo,
        pfx2as=Pfx2AsIndex.from_tsv(inp.pfx2as),
        anycast=AnycastIndex.from_csv(inp.anycast) if inp.anycast else AnycastIndex([]),
        points=points,
        probes={p.probe_id: p for p in probes},
        hints=HintRules.from_file(inp.hint_rules) if inp.hint_rules else HintRules(),
        hostnames=load_hostnames(inp.hostnames) if inp.hostnames else {},
    )

    table = None
    if inp.bgp_snapshots:
        snap = load_snapshots(inp.bgp_snapshots)
        warnings += [f"{inp.bgp_snapshots}: {w}" for w in snap.warnings]
        table = stable_routes(sorted(snap.days.items()), cfg.bgp.min_days)

    parsed = load_traceroutes(inp.traceroutes, {p.probe_id: p.country for p in probes})
    vcfg = ValidationConfig(sol_fraction=cfg.validation.sol_fraction, one_way_divisor=cfg.validation.one_way_divisor)
    return Loaded(data, parsed.items, scfg, vcfg, table, warnings, parsed.errors)


@dataclass(frozen=True)
class PathOutcome:
    record: dict
    bgp: Optional[dict] = None
    warning: bool = False


def dropped_record(path: TraceroutePath, actions) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "status": "dropped",
        "path_id": path.path_id,
        "measurement_id": path.measurement_id,
        "probe_id": path.probe_id,
        "src_country": path.src_country,
        "dst_fqdn": path.dst_fqdn,
        "dst_ip": path.dst_ip,
        "protocol": path.protocol,
        "timestamp": path.timestamp,
        "sanitize_actions": [a.to_dict() for a in actions],
    }


def process_path(
    path: TraceroutePath,
    data: Datasets,
    scfg: SanitizeConfig,
    vcfg: ValidationConfig,
    table: Optional[BgpRouteTable] = None,
) -> PathOutcome:
    """Full per-path pipeline. Failures become error records, never exceptions."""
    try:
        clean, actions = sanitize_path(path, scfg, data.geo)
        if clean is None:
            return PathOutcome(dropped_record(path, actions))
        analysis = analyze(clean, data, vcfg)
        analysis = replace(analysis, sanitize_actions=tuple(actions))
        inference = None
        if table is not None:
            inference, notes = match_incomplete(analysis, clean, table, data.pfx2as, data.probes.get(path.probe_id))
            if notes:
                analysis = replace(analysis, log=analysis.log + tuple(notes))
        warn = any(n.startswith("warning") for n in analysis.log)
        return PathOutcome(analysis.to_dict(), inference.to_dict() if inference else None, warn)
    except (AnalysisError, ValueError) as exc:
        return PathOutcome(
            {
                "schema": SCHEMA_VERSION,
                "status": "error",
                "path_id": path.path_id,
                "src_country": path.src_country,
                "error": str(exc),
            },
            warning=True,
        )


_WORKER_STATE: tuple = ()


def _init_worker(state: tuple) -> None:
    global _WORKER_STATE
    _WORKER_STATE = state


def _work(path: TraceroutePath) -> PathOutcome:
    return process_path(path, *_WORKER_STATE)


def run_batch(
    paths: Sequence[TraceroutePath],
    data: Datasets,
    scfg: SanitizeConfig,
    vcfg: ValidationConfig = ValidationConfig(),
    table: Optional[BgpRouteTable] = None,
    parallel: int = 1,
    progress: bool = False,
) -> list[PathOutcome]:
    """Outcomes in input order, independent of ``parallel``."""
    state = (data, scfg, vcfg, table)
    if parallel <= 1 or len(paths) < 2:
        outcomes = []
        for i, p in enumerate(paths, 1):
            outcomes.append(process_path(p, *state))
            if progress and i % 1000 == 0:
                print(f"analyzed {i}/{len(paths)}", file=sys.stderr)
        return outcomes
    chunk = max(1, len(paths) // (parallel * 8))
    with ProcessPoolExecutor(max_workers=parallel, initializer=_init_worker, initargs=(state,)) as pool:
        outcomes = list(pool.map(_work, paths, chunksize=chunk))
    if progress:
        print(f"analyzed {len(paths)}/{len(paths)}", file=sys.stderr)
    return outcomes


def write_outcomes(outcomes: Iterable[PathOutcome], analysis_path: str, bgp_path: Optional[str] = None) -> None:
    outcomes = list(outcomes)
    with open(analysis_path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(dumps(o.record) + "\n")
    if bgp_path is not None:
        with open(bgp_path, "w", encoding="utf-8") as fh:
            for o in outcomes:
                if o.bgp is not None:
                    fh.write(dumps(o.bgp) + "\n")


def analyses_of(outcomes: Iterable[PathOutcome]) -> list[PathAnalysis]:
    return [PathAnalysis.from_dict(o.record) for o in outcomes if o.record["status"] == "analyzed"]
