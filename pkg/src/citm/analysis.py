"""Per-path CitM analysis: classification, candidate detection, latency
validation, hostname corroboration, reachability and unlabeled-hop runs."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .geodata import AnycastIndex, CountryPoints, GeoIndex, HintRules, Pfx2AsIndex
from .ingest import ProbeRecord, TraceroutePath
from .sanitize import SanitizeAction, strip_replies

SCHEMA_VERSION = 1

PASS = "pass"
VIOLATE = "violate"
VALIDATED = "validated"
REMOVED = "removed"
AGREE, DISAGREE, UNKNOWN = "agree", "disagree", "unknown"


class Classification(str, enum.Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    ANYCAST = "Anycast"


class Reach(str, enum.Enum):
    REACHED_IP = "ReachedIP"
    REACHED_AS = "ReachedAS"
    NOT_REACHED = "NotReached"


class AnalysisError(Exception):
    pass


@dataclass(frozen=True)
class ValidationConfig:
    sol_fraction: float = 2.0 / 3.0
    c_km_per_ms: float = 299.792458
    one_way_divisor: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.sol_fraction <= 1.0:
            raise ValueError(f"sol_fraction must be in (0, 1], got {self.sol_fraction}")
        if self.one_way_divisor <= 0:
            raise ValueError("one_way_divisor must be positive")
        if self.c_km_per_ms <= 0:
            raise ValueError("c_km_per_ms must be positive")


@dataclass(frozen=True)
class Datasets:
    """Everything ``analyze`` reads. Built once, shared read-only."""

    geo: GeoIndex
    pfx2as: Pfx2AsIndex
    anycast: AnycastIndex
    points: CountryPoints
    probes: Mapping[str, ProbeRecord]
    hints: HintRules = field(default_factory=HintRules)
    hostnames: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ClassifyResult:
    classification: Classification
    dest_country: Optional[str]
    anycast_candidates: Optional[frozenset[str]] = None
    notes: tuple[str, ...] = ()


def classify(path: TraceroutePath, geo: GeoIndex, anycast: AnycastIndex) -> ClassifyResult:
    candidates = anycast.anycast_countries(path.dst_ip)
    if candidates is not None:
        return ClassifyResult(Classification.ANYCAST, None, candidates)
    rec = geo.geolocate(path.dst_ip)
    if rec is None:
        return ClassifyResult(
            Classification.DIVERGENT,
            None,
            notes=(f"warning: destination {path.dst_ip} not geolocated; unknown destination",),
        )
    if rec.country == path.src_country:
        return ClassifyResult(Classification.CONVERGENT, rec.country)
    return ClassifyResult(Classification.DIVERGENT, rec.country)


@dataclass(frozen=True)
class HopEvidence:
    hop_index: int
    ip: str
    rtt_ms: Optional[float]
    coords: Optional[tuple[float, float]]
    sol_status: Optional[str] = None
    hint_status: str = UNKNOWN

    def to_dict(self) -> dict:
        return {
            "hop": self.hop_index,
            "ip": self.ip,
            "rtt_ms": self.rtt_ms,
            "coords": list(self.coords) if self.coords else None,
            "sol_status": self.sol_status,
            "hint_status": self.hint_status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HopEvidence":
        return cls(d["hop"], d["ip"], d["rtt_ms"], tuple(d["coords"]) if d["coords"] else None,
                   d["sol_status"], d["hint_status"])


@dataclass(frozen=True)
class CitmEvidence:
    country: str
    hops: tuple[HopEvidence, ...]
    verdict: Optional[str] = None

    def to_dict(self) -> dict:
        return {"country": self.country, "verdict": self.verdict, "hops": [h.to_dict() for h in self.hops]}

    @classmethod
    def from_dict(cls, d: dict) -> "CitmEvidence":
        return cls(d["country"], tuple(HopEvidence.from_dict(h) for h in d["hops"]), d["verdict"])


def excluded_countries(path: TraceroutePath, cls: ClassifyResult) -> frozenset[str]:
    """Countries that can never be CitMs on this path."""
    out = {path.src_country}
    if cls.classification is Classification.ANYCAST:
        out |= cls.anycast_candidates or set()
    elif cls.dest_country is not None:
        out.add(cls.dest_country)
    return frozenset(out)


def detect_citms(path: TraceroutePath, geo: GeoIndex, cls: ClassifyResult) -> dict[str, list[HopEvidence]]:
    """Candidate CitM countries with every hop that supports each, keyed in sorted order."""
    excluded = excluded_countries(path, cls)
    found: dict[str, list[HopEvidence]] = {}
    for hop in path.hops:
        for ip in hop.ips():
            if ip == path.dst_ip:
                continue
            rec = geo.geolocate(ip)
            if rec is None or rec.country in excluded:
                continue
            found.setdefault(rec.country, []).append(HopEvidence(hop.index, ip, hop.min_rtt(ip), rec.coords))
    return {c: found[c] for c in sorted(found)}


def sol_check(
    probe: ProbeRecord,
    rtt_ms: Optional[float],
    claimed_country: str,
    hop_coords: Optional[tuple[float, float]],
    cfg: ValidationConfig,
    points: CountryPoints,
) -> str:
    """Speed-of-light feasibility of a reply claimed to come from ``claimed_country``.

    The reply violates when its one-way delay is shorter than the time
    light in fibre (``sol_fraction`` of c) needs to cover the minimum
    distance between the probe and the claimed country. Equality passes.
    A missing RTT cannot refute the geolocation and passes.
    """
    if rtt_ms is None:
        return PASS
    distance = points.min_distance_km((probe.lat, probe.lon), claimed_country, hop_coords)
    one_way = rtt_ms / cfg.one_way_divisor
    if one_way < distance / (cfg.sol_fraction * cfg.c_km_per_ms):
        return VIOLATE
    return PASS


def validate_citms(
    path: TraceroutePath,
    candidates: Mapping[str, list[HopEvidence]],
    probe: ProbeRecord,
    points: CountryPoints,
    cfg: ValidationConfig,
) -> tuple[list[CitmEvidence], TraceroutePath]:
    """Latency-check every candidate; a country whose hops all violate is removed.

    Removed countries have their replies stripped from the returned path
    view; the path itself is always kept.
    """
    evidence = []
    notes = []
    drop: set[tuple[int, str]] = set()
    for country, hops in candidates.items():
        checked = []
        for h in hops:
            if h.rtt_ms is None:
                notes.append(f"validate: hop {h.hop_index} {h.ip} has no rtt; passes by convention")
            checked.append(replace(h, sol_status=sol_check(probe, h.rtt_ms, country, h.coords, cfg, points)))
        if all(h.sol_status == VIOLATE for h in checked):
            verdict = REMOVED
            drop.update((h.hop_index, h.ip) for h in checked)
            notes.extend(
                f"validate: removed {country} hop {h.hop_index} {h.ip} (rtt {h.rtt_ms} ms too fast)" for h in checked
            )
        else:
            verdict = VALIDATED
        evidence.append(CitmEvidence(country, tuple(checked), verdict))
    if drop:
        path, _ = strip_replies(
            path, lambda hop, ip: ("remove_citm", "speed-of-light violation") if (hop.index, ip) in drop else None
        )
    if notes:
        path = path.with_note(*notes)
    return evidence, path


def corroborate_hostnames(
    evidence: list[CitmEvidence],
    rules: HintRules,
    hostnames: Mapping[str, str],
) -> list[CitmEvidence]:
    """Fill ``hint_status`` from router hostnames. Verdicts are left untouched."""
    out = []
    for ev in evidence:
        hops = []
        for h in ev.hops:
            hint = rules.hint_country(hostnames.get(h.ip))
            if hint is None:
                status = UNKNOWN
            elif hint == ev.country:
                status = AGREE
            else:
                status = DISAGREE
            hops.append(replace(h, hint_status=status))
        out.append(replace(ev, hops=tuple(hops)))
    return out


def reach_status(path: TraceroutePath, pfx2as: Pfx2AsIndex) -> tuple[Reach, tuple[str, ...]]:
    last = next((hop for hop in reversed(path.hops) if hop.labeled), None)
    if last is not None and path.dst_ip in last.ips():
        return Reach.REACHED_IP, ()
    dst_asn = pfx2as.asn_of(path.dst_ip)
    if dst_asn is None:
        return Reach.NOT_REACHED, (f"warning: no origin AS for destination {path.dst_ip}",)
    if any(pfx2as.asn_of(ip) == dst_asn for ip in path.reply_ips()):
        return Reach.REACHED_AS, ()
    return Reach.NOT_REACHED, ()


def longest_unlabeled_run(path: TraceroutePath) -> int:
    best = run = 0
    for hop in path.hops:
        if hop.labeled:
            run = 0
        else:
            run += 1
            best = max(best, run)
    return best


def destination_loops(path: TraceroutePath) -> list[int]:
    """Hop indices before the last labeled hop that answer from the destination IP."""
    labeled = [h for h in path.hops if h.labeled]
    return [h.index for h in labeled[:-1] if path.dst_ip in h.ips()]


@dataclass(frozen=True)
class PathAnalysis:
    path_id: str
    measurement_id: str
    probe_id: str
    src_country: str
    dst_fqdn: str
    dst_ip: str
    protocol: str
    timestamp: int
    classification: Classification
    dest_country: Optional[str]
    anycast_candidate_countries: Optional[frozenset[str]]
    citm_evidence: tuple[CitmEvidence, ...]
    reach: Reach
    longest_unlabeled_run: int
    n_hops: int
    log: tuple[str, ...] = ()
    sanitize_actions: tuple[SanitizeAction, ...] = ()

    @property
    def sanitize_kinds(self) -> tuple[str, ...]:
        return tuple(a.kind for a in self.sanitize_actions)

    @property
    def citms(self) -> list[str]:
        return [e.country for e in self.citm_evidence if e.verdict == VALIDATED]

    @property
    def n_citms(self) -> int:
        return len(self.citms)

    @property
    def n_citm_hops(self) -> int:
        return sum(len(e.hops) for e in self.citm_evidence if e.verdict == VALIDATED)

    @property
    def removed_citms(self) -> list[str]:
        return [e.country for e in self.citm_evidence if e.verdict == REMOVED]

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "status": "analyzed",
            "path_id": self.path_id,
            "measurement_id": self.measurement_id,
            "probe_id": self.probe_id,
            "src_country": self.src_country,
            "dst_fqdn": self.dst_fqdn,
            "dst_ip": self.dst_ip,
            "protocol": self.protocol,
            "timestamp": self.timestamp,
            "classification": self.classification.value,
            "dest_country": self.dest_country,
            "anycast_candidate_countries": (
                sorted(self.anycast_candidate_countries) if self.anycast_candidate_countries is not None else None
            ),
            "citms": self.citms,
            "n_citms": self.n_citms,
            "n_citm_hops": self.n_citm_hops,
            "citm_evidence": [e.to_dict() for e in self.citm_evidence],
            "reach": self.reach.value,
            "longest_unlabeled_run": self.longest_unlabeled_run,
            "n_hops": self.n_hops,
            "sanitize_actions": [a.to_dict() for a in self.sanitize_actions],
            "log": list(self.log),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PathAnalysis":
        cands = d.get("anycast_candidate_countries")
        return cls(
            path_id=d["path_id"],
            measurement_id=d["measurement_id"],
            probe_id=d["probe_id"],
            src_country=d["src_country"],
            dst_fqdn=d["dst_fqdn"],
            dst_ip=d["dst_ip"],
            protocol=d["protocol"],
            timestamp=d["timestamp"],
            classification=Classification(d["classification"]),
            dest_country=d["dest_country"],
            anycast_candidate_countries=frozenset(cands) if cands is not None else None,
            citm_evidence=tuple(CitmEvidence.from_dict(e) for e in d["citm_evidence"]),
            reach=Reach(d["reach"]),
            longest_unlabeled_run=d["longest_unlabeled_run"],
            n_hops=d["n_hops"],
            log=tuple(d.get("log", ())),
            sanitize_actions=tuple(
                SanitizeAction(a["kind"], d["path_id"], a["subject"], a["reason"]) for a in d.get("sanitize_actions", ())
            ),
        )


def analyze(path: TraceroutePath, data: Datasets, cfg: ValidationConfig = ValidationConfig()) -> PathAnalysis:
    """Classify, detect, validate, corroborate, then measure reach and runs.

    Reach and unlabeled runs are measured on the validated view, where
    replies of removed CitMs no longer count as labeled.
    """
    probe = data.probes.get(path.probe_id)
    if probe is None:
        raise AnalysisError(f"no metadata for probe {path.probe_id}")
    cls = classify(path, data.geo, data.anycast)
    notes = list(cls.notes)
    loops = destination_loops(path)
    if loops:
        notes.append(f"anomaly: destination {path.dst_ip} answers mid-path at hops {loops}")
    candidates = detect_citms(path, data.geo, cls)
    try:
        evidence, view = validate_citms(path, candidates, probe, data.points, cfg)
    except KeyError as exc:
        raise AnalysisError(str(exc)) from None
    evidence = corroborate_hostnames(evidence, data.hints, data.hostnames)
    reach, reach_notes = reach_status(view, data.pfx2as)
    notes.extend(reach_notes)
    view = view.with_note(*notes)
    return PathAnalysis(
        path_id=path.path_id,
        measurement_id=path.measurement_id,
        probe_id=path.probe_id,
        src_country=path.src_country,
        dst_fqdn=path.dst_fqdn,
        dst_ip=path.dst_ip,
        protocol=path.protocol,
        timestamp=path.timestamp,
        classification=cls.classification,
        dest_country=cls.dest_country,
        anycast_candidate_countries=cls.anycast_candidates,
        citm_evidence=tuple(evidence),
        reach=reach,
        longest_unlabeled_run=longest_unlabeled_run(view),
        n_hops=len(path.hops),
        log=view.log,
    )
