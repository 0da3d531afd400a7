"""Stability-filtered BGP routes and missing-AS inference for incomplete traceroutes.

Inferred ASes are circumstantial: they annotate paths but never feed CitM counts.
"""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .analysis import PathAnalysis, Reach
from .geodata import Pfx2AsIndex
from .ingest import ProbeRecord, TraceroutePath


RouteKey = tuple[str, tuple[int, ...]]


def collapse_prepending(as_path: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for asn in as_path:
        if not out or out[-1] != asn:
            out.append(asn)
    return tuple(out)


@dataclass(frozen=True)
class BgpRoute:
    prefix: str
    as_path: tuple[int, ...]
    snapshot_date: dt.date


@dataclass
class SnapshotParse:
    days: dict[dt.date, set[RouteKey]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def parse_snapshots(stream: IO[str] | Iterable[str]) -> SnapshotParse:
    """Read ``date<TAB>prefix<TAB>as_path`` rows grouped by day.

    Paths containing AS sets (``{a,b}``) are skipped with a warning.
    """
    out = SnapshotParse()
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            day_s, prefix, path_s = line.split("\t")
        except ValueError:
            out.warnings.append(f"line {lineno}: expected 3 tab-separated columns")
            continue
        if "{" in path_s:
            out.warnings.append(f"line {lineno}: AS set in path {path_s!r} rejected")
            continue
        try:
            day = dt.date.fromisoformat(day_s)
            as_path = collapse_prepending(int(a) for a in path_s.split())
        except ValueError as exc:
            out.warnings.append(f"line {lineno}: {exc}")
            continue
        if not as_path:
            out.warnings.append(f"line {lineno}: empty AS path")
            continue
        out.days.setdefault(day, set()).add((prefix, as_path))
    return out


def longest_consecutive_run(days: Iterable[dt.date]) -> int:
    ordinals = sorted({d.toordinal() for d in days})
    best = run = 0
    prev = None
    for o in ordinals:
        run = run + 1 if prev is not None and o == prev + 1 else 1
        best = max(best, run)
        prev = o
    return best


@dataclass
class BgpRouteTable:
    routes: dict[RouteKey, int]
    min_days: int
    n_dropped: int = 0
    _by_asn: dict[int, set[RouteKey]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        by_asn: dict[int, set[RouteKey]] = defaultdict(set)
        for key in self.routes:
            for asn in key[1]:
                by_asn[asn].add(key)
        self._by_asn = dict(by_asn)

    def __len__(self) -> int:
        return len(self.routes)

    def containing(self, *asns: int) -> list[RouteKey]:
        sets = [self._by_asn.get(a, set()) for a in asns]
        if not sets:
            return []
        return sorted(set.intersection(*sets))


def stable_routes(
    snapshots: Iterable[tuple[dt.date, Iterable[tuple[str, Iterable[int]]]]],
    min_days: int = 5,
) -> BgpRouteTable:
    """Keep routes seen on at least ``min_days`` consecutive calendar days."""
    if min_days < 1:
        raise ValueError("min_days must be >= 1")
    seen_days: dict[RouteKey, list[dt.date]] = defaultdict(list)
    days_seen: set[dt.date] = set()
    for day, routes in snapshots:
        if day in days_seen:
            raise ValueError(f"duplicate snapshot day {day.isoformat()}")
        days_seen.add(day)
        for prefix, as_path in set((p, collapse_prepending(a)) for p, a in routes):
            seen_days[(prefix, as_path)].append(day)
    kept = {}
    dropped = 0
    for key, days in seen_days.items():
        run = longest_consecutive_run(days)
        if run >= min_days:
            kept[key] = run
        else:
            dropped += 1
    return BgpRouteTable(dict(sorted(kept.items())), min_days, dropped)


@dataclass(frozen=True)
class BgpInference:
    path_id: str
    src_asn: int
    dst_asn: int
    last_observed_asn: Optional[int]
    candidates: tuple[int, ...]
    n_routes: int
    label: str = "circumstantial"

    def to_dict(self) -> dict:
        return {
            "path_id": self.path_id,
            "label": self.label,
            "src_asn": self.src_asn,
            "dst_asn": self.dst_asn,
            "last_observed_asn": self.last_observed_asn,
            "candidate_asns": list(self.candidates),
            "n_routes": self.n_routes,
        }


def match_incomplete(
    analysis: PathAnalysis,
    path: TraceroutePath,
    table: BgpRouteTable,
    pfx2as: Pfx2AsIndex,
    probe: Optional[ProbeRecord] = None,
) -> tuple[Optional[BgpInference], list[str]]:
    """ASes a traceroute that stopped short could have crossed.

    Among stable routes containing the source AS before the destination AS,
    collect the ASes between the last AS the traceroute revealed and the
    destination. The source AS falls back to the probe's registered AS when
    the source address is unannounced (e.g. behind NAT).
    """
    if analysis.reach is Reach.REACHED_IP:
        return None, []
    src_asn = pfx2as.asn_of(path.src_ip)
    if src_asn is None and probe is not None:
        src_asn = probe.asn
    dst_asn = pfx2as.asn_of(path.dst_ip)
    if src_asn is None or dst_asn is None:
        return None, [f"warning: {path.path_id}: source or destination AS unresolvable"]

    observed = []
    for ip in path.reply_ips():
        asn = pfx2as.asn_of(ip)
        if asn is not None and (not observed or observed[-1] != asn):
            observed.append(asn)
    last = observed[-1] if observed else None
    seen = set(observed)

    candidates: set[int] = set()
    n = 0
    for _prefix, as_path in table.containing(src_asn, dst_asn):
        i_src, i_dst = as_path.index(src_asn), as_path.index(dst_asn)
        if i_src >= i_dst:
            continue
        n += 1
        if last == dst_asn:
            continue
        if last is not None and last in as_path[i_src:i_dst]:
            start = as_path.index(last, i_src) + 1
            candidates.update(as_path[start:i_dst])
        else:
            candidates.update(a for a in as_path[i_src + 1 : i_dst] if a not in seen)
    if n == 0:
        return None, []
    return BgpInference(path.path_id, src_asn, dst_asn, last, tuple(sorted(candidates)), n), []


def load_snapshots(path: str) -> SnapshotParse:
    with open(path, encoding="utf-8") as fh:
        return parse_snapshots(fh)
