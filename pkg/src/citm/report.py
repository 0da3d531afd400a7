"""Aggregate per-path results into per-country tables and chart data."""

from __future__ import annotations

import csv
import json
import os
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Optional, Sequence

from .analysis import Classification, PathAnalysis, Reach

# Sanitization/validation outcome per path, most severe first. A path lands
# in the first bucket whose condition it meets.
BUCKETS = (
    ("bad_probe", "drop_path_probe"),
    ("bad_website", "drop_path_target"),
    ("ip_squatting", "strip_squat"),
    ("geolocation_error", "remove_citm"),
    ("legacy_single_country", "strip_legacy_single"),
    ("private_hops", "strip_private"),
)
BUCKET_NAMES = tuple(b for b, _ in BUCKETS) + ("unmodified",)
DEFAULT_CITM_BUCKETS = (0, 1, 2, 3)


@dataclass(frozen=True)
class DroppedPath:
    path_id: str
    probe_id: str
    src_country: str
    dst_fqdn: str
    protocol: str
    action_kinds: tuple[str, ...]


def path_bucket(action_kinds: Iterable[str]) -> str:
    kinds = set(action_kinds)
    for name, kind in BUCKETS:
        if kind in kinds:
            return name
    return "unmodified"


def analysis_action_kinds(a: PathAnalysis) -> tuple[str, ...]:
    kinds = list(a.sanitize_kinds)
    if a.removed_citms:
        kinds.append("remove_citm")
    return tuple(kinds)


def round_half_up(x: float, places: int = 1) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def fmt2(x: float) -> str:
    return round_half_up(x, 2)


def pct(n: int, d: int) -> float:
    return 100.0 * n / d if d else 0.0


@dataclass
class CountryAccumulator:
    """Order-independent counters for one source country; merge() is a monoid op."""

    probes: set = field(default_factory=set)
    collected: int = 0
    classes: Counter = field(default_factory=Counter)
    with_citm: Counter = field(default_factory=Counter)
    unknown_dest: int = 0
    citm_paths: Counter = field(default_factory=Counter)
    reach: Counter = field(default_factory=Counter)
    buckets: Counter = field(default_factory=Counter)
    banjo: Counter = field(default_factory=Counter)
    runs: Counter = field(default_factory=Counter)

    def add_analysis(self, a: PathAnalysis, citm_buckets: Sequence[int] = DEFAULT_CITM_BUCKETS) -> None:
        self.collected += 1
        self.probes.add(a.probe_id)
        cls = a.classification.value
        self.classes[cls] += 1
        if a.n_citms:
            self.with_citm[cls] += 1
        if a.classification is Classification.DIVERGENT and a.dest_country is None:
            self.unknown_dest += 1
        if a.classification is not Classification.ANYCAST:
            self.citm_paths.update(set(a.citms))
            self.banjo[(cls, citm_bucket(a.n_citms, citm_buckets))] += 1
        self.reach[a.reach.value] += 1
        self.buckets[path_bucket(analysis_action_kinds(a))] += 1
        self.runs[a.longest_unlabeled_run] += 1

    def add_dropped(self, d: DroppedPath) -> None:
        self.collected += 1
        self.buckets[path_bucket(d.action_kinds)] += 1

    def merge(self, other: "CountryAccumulator") -> "CountryAccumulator":
        out = CountryAccumulator()
        out.probes = self.probes | other.probes
        out.collected = self.collected + other.collected
        out.unknown_dest = self.unknown_dest + other.unknown_dest
        for name in ("classes", "with_citm", "citm_paths", "reach", "buckets", "banjo", "runs"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    @property
    def n_paths(self) -> int:
        return sum(self.classes.values())

    @property
    def n_unicast(self) -> int:
        return self.classes["Convergent"] + self.classes["Divergent"]


def citm_bucket(n: int, buckets: Sequence[int] = DEFAULT_CITM_BUCKETS) -> str:
    top = buckets[-1]
    return f"{top}+" if n >= top else str(n)


def bucket_labels(buckets: Sequence[int] = DEFAULT_CITM_BUCKETS) -> list[str]:
    return [str(b) for b in buckets[:-1]] + [f"{buckets[-1]}+"]


def accumulate(
    analyses: Iterable[PathAnalysis],
    dropped: Iterable[DroppedPath] = (),
    citm_buckets: Sequence[int] = DEFAULT_CITM_BUCKETS,
) -> dict[str, CountryAccumulator]:
    acc: dict[str, CountryAccumulator] = defaultdict(CountryAccumulator)
    for a in analyses:
        acc[a.src_country].add_analysis(a, citm_buckets)
    for d in dropped:
        acc[d.src_country].add_dropped(d)
    return dict(acc)


@dataclass(frozen=True)
class CountryReport:
    country: str
    n_probes_used: int
    n_paths_collected: int
    n_paths: int
    n_convergent: int
    n_divergent: int
    n_anycast: int
    n_unknown_destination: int
    pct_convergent: float
    pct_divergent: float
    pct_anycast: float
    pct_convergent_with_citm: float
    pct_divergent_with_citm: float
    pct_anycast_with_citm: float
    top_citms: tuple[tuple[str, int], ...]
    reach: tuple[tuple[str, int], ...]
    buckets: tuple[tuple[str, int], ...]


def finalize(country: str, acc: CountryAccumulator) -> CountryReport:
    n = acc.n_paths
    c = acc.classes
    return CountryReport(
        country=country,
        n_probes_used=len(acc.probes),
        n_paths_collected=acc.collected,
        n_paths=n,
        n_convergent=c["Convergent"],
        n_divergent=c["Divergent"],
        n_anycast=c["Anycast"],
        n_unknown_destination=acc.unknown_dest,
        pct_convergent=pct(c["Convergent"], n),
        pct_divergent=pct(c["Divergent"], n),
        pct_anycast=pct(c["Anycast"], n),
        pct_convergent_with_citm=pct(acc.with_citm["Convergent"], c["Convergent"]),
        pct_divergent_with_citm=pct(acc.with_citm["Divergent"], c["Divergent"]),
        pct_anycast_with_citm=pct(acc.with_citm["Anycast"], c["Anycast"]),
        top_citms=tuple(sorted(acc.citm_paths.items(), key=lambda kv: (-kv[1], kv[0]))),
        reach=tuple((r.value, acc.reach[r.value]) for r in Reach),
        buckets=tuple((b, acc.buckets[b]) for b in BUCKET_NAMES),
    )


def aggregate(
    analyses: Iterable[PathAnalysis],
    dropped: Iterable[DroppedPath] = (),
    citm_buckets: Sequence[int] = DEFAULT_CITM_BUCKETS,
) -> list[CountryReport]:
    acc = accumulate(analyses, dropped, citm_buckets)
    return [finalize(c, acc[c]) for c in sorted(acc)]


@dataclass(frozen=True)
class HeatmapCell:
    src_country: str
    citm_country: str
    n_paths: int
    fraction: float


def heatmap(analyses: Iterable[PathAnalysis]) -> list[HeatmapCell]:
    """Share of each source's unicast paths with a given validated CitM."""
    totals: Counter = Counter()
    hits: Counter = Counter()
    for a in analyses:
        if a.classification is Classification.ANYCAST:
            continue
        totals[a.src_country] += 1
        for c in set(a.citms):
            hits[(a.src_country, c)] += 1
    return [HeatmapCell(s, c, n, n / totals[s]) for (s, c), n in sorted(hits.items())]


@dataclass(frozen=True)
class BanjoRow:
    country: str
    n_probes: int
    counts: tuple[tuple[str, float], ...]
    outline: float


def banjo(
    accs: dict[str, CountryAccumulator], citm_buckets: Sequence[int] = DEFAULT_CITM_BUCKETS
) -> list[BanjoRow]:
    """Stacked-bar data per country, normalized by contributing probes.

    The outline covers every collected path, including dropped ones.
    """
    rows = []
    labels = bucket_labels(citm_buckets)
    for country in sorted(accs):
        acc = accs[country]
        denom = max(len(acc.probes), 1)
        counts = tuple(
            (f"{cls.lower()}_{lab}", acc.banjo[(cls, lab)] / denom)
            for cls in ("Convergent", "Divergent")
            for lab in labels
        )
        rows.append(BanjoRow(country, len(acc.probes), counts, acc.collected / denom))
    return rows


def unlabeled_cdf(analyses: Iterable[PathAnalysis]) -> dict[str, list[tuple[int, float]]]:
    runs: dict[str, Counter] = defaultdict(Counter)
    for a in analyses:
        runs[a.src_country][a.longest_unlabeled_run] += 1
    return {country: cdf_from_counts(runs[country]) for country in sorted(runs)}


def cdf_from_counts(counts: Counter) -> list[tuple[int, float]]:
    total = sum(counts.values())
    if not total:
        return []
    out, cum = [], 0
    for x in range(max(counts) + 1):
        cum += counts.get(x, 0)
        out.append((x, cum / total))
    out[-1] = (out[-1][0], 1.0)
    return out


@dataclass(frozen=True)
class ProtocolRate:
    src_country: str
    protocol: str
    n_paths: int
    n_reached_ip: int
    rate: float


@dataclass(frozen=True)
class ProtocolPair:
    src_country: str
    probe_id: str
    dst_fqdn: str
    protocols: tuple[str, ...]
    citm_sets: tuple[tuple[str, tuple[str, ...]], ...]
    citm_sets_equal: bool


def protocol_comparison(analyses: Iterable[PathAnalysis]) -> tuple[list[ProtocolRate], list[ProtocolPair]]:
    """Reach rates per protocol, and whether pairs measured with several
    protocols cross the same CitMs under each."""
    n: Counter = Counter()
    reached: Counter = Counter()
    pairs: dict[tuple[str, str, str], dict[str, set]] = defaultdict(lambda: defaultdict(set))
    for a in analyses:
        key = (a.src_country, a.protocol)
        n[key] += 1
        if a.reach is Reach.REACHED_IP:
            reached[key] += 1
        pairs[(a.src_country, a.probe_id, a.dst_fqdn)][a.protocol].update(a.citms)
    rates = [ProtocolRate(s, p, n[(s, p)], reached[(s, p)], reached[(s, p)] / n[(s, p)]) for s, p in sorted(n)]
    out_pairs = []
    for (s, probe, fqdn), by_proto in sorted(pairs.items()):
        if len(by_proto) < 2:
            continue
        sets = tuple((p, tuple(sorted(by_proto[p]))) for p in sorted(by_proto))
        equal = len({cs for _, cs in sets}) == 1
        out_pairs.append(ProtocolPair(s, probe, fqdn, tuple(sorted(by_proto)), sets, equal))
    return rates, out_pairs


@dataclass
class ReportSet:
    countries: list[CountryReport]
    heatmap: list[HeatmapCell]
    banjo: list[BanjoRow]
    cdf: dict[str, list[tuple[int, float]]]
    protocol_rates: list[ProtocolRate]
    protocol_pairs: list[ProtocolPair]
    citm_buckets: tuple[int, ...] = DEFAULT_CITM_BUCKETS
    n_errors: int = 0


def build_reports(
    analyses: Sequence[PathAnalysis],
    dropped: Sequence[DroppedPath] = (),
    citm_buckets: Sequence[int] = DEFAULT_CITM_BUCKETS,
    n_errors: int = 0,
) -> ReportSet:
    accs = accumulate(analyses, dropped, citm_buckets)
    rates, pairs = protocol_comparison(analyses)
    return ReportSet(
        countries=[finalize(c, accs[c]) for c in sorted(accs)],
        heatmap=heatmap(analyses),
        banjo=banjo(accs, citm_buckets),
        cdf=unlabeled_cdf(analyses),
        protocol_rates=rates,
        protocol_pairs=pairs,
        citm_buckets=tuple(citm_buckets),
        n_errors=n_errors,
    )


COUNTRY_FIELDS = (
    ["country", "n_probes_used", "n_paths_collected", "n_paths", "n_convergent", "n_divergent", "n_anycast",
     "n_unknown_destination", "pct_convergent", "pct_divergent", "pct_anycast", "pct_convergent_with_citm",
     "pct_divergent_with_citm", "pct_anycast_with_citm", "top_citms"]
    + [f"reach_{r.value}" for r in Reach]
    + [f"bucket_{b}" for b in BUCKET_NAMES]
)


def _country_row(r: CountryReport) -> list:
    row = [r.country, r.n_probes_used, r.n_paths_collected, r.n_paths, r.n_convergent, r.n_divergent, r.n_anycast,
           r.n_unknown_destination]
    row += [round_half_up(getattr(r, f)) for f in COUNTRY_FIELDS[8:14]]
    row.append(";".join(f"{c}:{k}" for c, k in r.top_citms))
    row += [k for _, k in r.reach]
    row += [k for _, k in r.buckets]
    return row


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_protocol_csvs(rates, pairs, out_dir: str) -> list[str]:
    rate_path = os.path.join(out_dir, "protocol_comparison.csv")
    _write_csv(
        rate_path,
        ["src_country", "protocol", "n_paths", "n_reached_ip", "reached_ip_rate"],
        ([r.src_country, r.protocol, r.n_paths, r.n_reached_ip, fmt2(r.rate)] for r in rates),
    )
    pair_path = os.path.join(out_dir, "protocol_pairs.csv")
    _write_csv(
        pair_path,
        ["src_country", "probe_id", "dst_fqdn", "protocols", "citm_sets", "citm_sets_equal"],
        (
            [p.src_country, p.probe_id, p.dst_fqdn, "|".join(p.protocols),
             ";".join(f"{proto}:{'|'.join(cs)}" for proto, cs in p.citm_sets), int(p.citm_sets_equal)]
            for p in pairs
        ),
    )
    return [rate_path, pair_path]


def emit_csv(rs: ReportSet, out_dir: str) -> list[str]:
    written = []
    p = os.path.join(out_dir, "country_report.csv")
    _write_csv(p, COUNTRY_FIELDS, (_country_row(r) for r in rs.countries))
    written.append(p)

    p = os.path.join(out_dir, "heatmap.csv")
    _write_csv(p, ["src_country", "citm_country", "n_paths", "fraction"],
               ([c.src_country, c.citm_country, c.n_paths, fmt2(c.fraction)] for c in rs.heatmap))
    written.append(p)

    labels = [f"{cls}_{lab}" for cls in ("convergent", "divergent") for lab in bucket_labels(rs.citm_buckets)]
    p = os.path.join(out_dir, "banjo.csv")
    _write_csv(p, ["country", "n_probes"] + labels + ["outline"],
               ([b.country, b.n_probes] + [fmt2(v) for _, v in b.counts] + [fmt2(b.outline)] for b in rs.banjo))
    written.append(p)

    p = os.path.join(out_dir, "unlabeled_cdf.csv")
    _write_csv(p, ["country", "run_length", "cumulative_fraction"],
               ([c, x, fmt2(f)] for c in sorted(rs.cdf) for x, f in rs.cdf[c]))
    written.append(p)

    written += write_protocol_csvs(rs.protocol_rates, rs.protocol_pairs, out_dir)
    return written


def report_to_dict(rs: ReportSet) -> dict:
    return {
        "schema": 1,
        "methodology": {
            "country_distance": "minimum over representative points and hop coordinates",
            "citm_buckets": list(rs.citm_buckets),
        },
        "n_errors": rs.n_errors,
        "countries": [asdict(r) for r in rs.countries],
        "heatmap": [asdict(c) for c in rs.heatmap],
        "banjo": [asdict(b) for b in rs.banjo],
        "unlabeled_cdf": {c: [[x, f] for x, f in v] for c, v in rs.cdf.items()},
        "protocol_rates": [asdict(r) for r in rs.protocol_rates],
        "protocol_pairs": [asdict(p) for p in rs.protocol_pairs],
    }


def emit_structured(rs: ReportSet, out_dir: str) -> list[str]:
    p = os.path.join(out_dir, "report.json")
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(rs), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return [p]


def emit(rs: ReportSet, fmt: str, out_dir: str) -> list[str]:
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    if fmt == "csv":
        return emit_csv(rs, out_dir)
    if fmt == "structured":
        return emit_structured(rs, out_dir)
    if fmt == "svg":
        from .plots import emit_svg

        return emit_svg(rs, out_dir)
    raise ValueError(f"unknown format {fmt!r}")


def load_analysis_file(path: str) -> tuple[list[PathAnalysis], list[DroppedPath], int]:
    """Read ``analysis.jsonl`` back into analyses, dropped paths and an error count."""
    analyses, dropped, errors = [], [], 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            status = d.get("status")
            if status == "analyzed":
                analyses.append(PathAnalysis.from_dict(d))
            elif status == "dropped":
                dropped.append(
                    DroppedPath(d["path_id"], d["probe_id"], d["src_country"], d["dst_fqdn"], d["protocol"],
                                tuple(a["kind"] for a in d["sanitize_actions"]))
                )
            else:
                errors += 1
    return analyses, dropped, errors


def check_percentages(r: CountryReport, tol: float = 0.1) -> Optional[str]:
    if r.n_paths == 0:
        return None
    total = r.pct_convergent + r.pct_divergent + r.pct_anycast
    if abs(total - 100.0) > tol:
        return f"{r.country}: percentages sum to {total}"
    return None
