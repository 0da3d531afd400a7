"""Pre-analysis sanitization: drop bad probes/targets, strip unusable replies."""

from __future__ import annotations

import ipaddress
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib.resources import files
from typing import Callable, Iterable, Optional

from .geodata import GeoIndex, ip_to_int
from .ingest import UNLABELED, Hop, ProbeRecord, TraceroutePath

ACTION_KINDS = (
    "drop_path_probe",
    "drop_path_target",
    "strip_private",
    "strip_squat",
    "strip_legacy_single",
)


def read_cidr_list(lines: Iterable[str]) -> list[ipaddress.IPv4Network]:
    nets = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            nets.append(ipaddress.IPv4Network(line, strict=False))
    return nets


def read_id_list(lines: Iterable[str]) -> set[str]:
    out = set()
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(line.lower())
    return out


def _bundled_cidrs(name: str) -> list[ipaddress.IPv4Network]:
    with files("citm.data").joinpath(name).open("r", encoding="utf-8") as fh:
        return read_cidr_list(fh)


def default_bogons() -> list[ipaddress.IPv4Network]:
    return _bundled_cidrs("bogons.txt")


def default_squats() -> list[ipaddress.IPv4Network]:
    return _bundled_cidrs("squats.txt")


class CidrSet:
    """Membership test over a list of IPv4 networks."""

    def __init__(self, nets: Iterable[ipaddress.IPv4Network]):
        self.nets = list(nets)
        self._ranges = sorted((int(n.network_address), int(n.broadcast_address)) for n in self.nets)

    def __contains__(self, ip: str) -> bool:
        addr = ip_to_int(ip)
        return any(lo <= addr <= hi for lo, hi in self._ranges)


@dataclass
class SanitizeConfig:
    bogon_cidrs: list[ipaddress.IPv4Network] = field(default_factory=default_bogons)
    squat_cidrs: list[ipaddress.IPv4Network] = field(default_factory=default_squats)
    excluded_probe_ids: set[str] = field(default_factory=set)
    excluded_fqdns: set[str] = field(default_factory=set)
    legacy_single_occurrence_filter: bool = False
    exclusion_reasons: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._bogons = CidrSet(self.bogon_cidrs)
        self._squats = CidrSet(self.squat_cidrs)

    def is_bogon(self, ip: str) -> bool:
        return ip in self._bogons

    def is_squat(self, ip: str) -> bool:
        return ip in self._squats


@dataclass(frozen=True)
class SanitizeAction:
    kind: str
    path_id: str
    subject: str
    reason: str

    def __str__(self) -> str:
        return f"{self.kind} {self.subject}: {self.reason}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "subject": self.subject, "reason": self.reason}


def strip_replies(
    path: TraceroutePath,
    should_strip: Callable[[Hop, str], Optional[tuple[str, str]]],
) -> tuple[TraceroutePath, list[tuple[str, str, str]]]:
    """Remove replies selected by ``should_strip(hop, ip) -> (kind, reason)``.

    A hop that loses all its replies becomes a single unlabeled reply, so
    TTL positions survive. Returns the new path and one
    ``(kind, subject, reason)`` per stripped (hop, ip).
    """
    stripped: list[tuple[str, str, str]] = []
    new_hops = []
    changed = False
    for hop in path.hops:
        verdicts = {}
        for ip in hop.ips():
            v = should_strip(hop, ip)
            if v is not None:
                verdicts[ip] = v
                stripped.append((v[0], f"hop {hop.index} {ip}", v[1]))
        if not verdicts:
            new_hops.append(hop)
            continue
        changed = True
        kept = tuple(r for r in hop.replies if r.from_ip not in verdicts)
        # an all-unlabeled hop stays a single unlabeled reply
        if not any(r.labeled for r in kept):
            kept = (UNLABELED,)
        new_hops.append(Hop(hop.index, kept))
    if not changed:
        return path, stripped
    return replace(path, hops=tuple(new_hops)), stripped


def sanitize_path(
    path: TraceroutePath,
    config: SanitizeConfig,
    geo: Optional[GeoIndex] = None,
) -> tuple[Optional[TraceroutePath], list[SanitizeAction]]:
    pid = path.path_id
    if path.probe_id in config.excluded_probe_ids:
        reason = config.exclusion_reasons.get(path.probe_id, "probe excluded")
        return None, [SanitizeAction("drop_path_probe", pid, f"probe {path.probe_id}", reason)]
    if path.dst_fqdn in config.excluded_fqdns:
        reason = config.exclusion_reasons.get(path.dst_fqdn, "target excluded")
        return None, [SanitizeAction("drop_path_target", pid, path.dst_fqdn, reason)]

    def bad_address(hop: Hop, ip: str):
        if config.is_bogon(ip):
            return ("strip_private", "private or reserved address")
        if config.is_squat(ip):
            return ("strip_squat", "squatted address range")
        return None

    out, stripped = strip_replies(path, bad_address)

    if config.legacy_single_occurrence_filter:
        if geo is None:
            raise ValueError("legacy single-occurrence filter needs a GeoIndex")
        out, legacy = _strip_single_occurrence(out, geo)
        stripped += legacy

    actions = [SanitizeAction(kind, pid, subject, reason) for kind, subject, reason in stripped]
    if actions:
        out = out.with_note(*(f"sanitize: {a}" for a in actions))
    return out, actions


def _strip_single_occurrence(path: TraceroutePath, geo: GeoIndex):
    """Pilot-style noise filter: drop hops in a country seen on only one hop."""
    hop_countries: Counter[str] = Counter()
    for hop in path.hops:
        cs = set()
        for ip in hop.ips():
            if ip == path.dst_ip:
                continue
            rec = geo.geolocate(ip)
            if rec is not None:
                cs.add(rec.country)
        hop_countries.update(cs)
    singles = {c for c, n in hop_countries.items() if n == 1}
    if not singles:
        return path, []

    def single(hop: Hop, ip: str):
        if ip == path.dst_ip:
            return None
        rec = geo.geolocate(ip)
        if rec is not None and rec.country in singles:
            return ("strip_legacy_single", f"country {rec.country} appears on one hop only")
        return None

    return strip_replies(path, single)


@dataclass(frozen=True)
class DroppedProbe:
    probe: ProbeRecord
    reason: str


def filter_probes(
    probes: Iterable[ProbeRecord],
    config: SanitizeConfig,
    locate: Optional[Callable[[float, float], Optional[str]]] = None,
) -> tuple[list[ProbeRecord], list[DroppedProbe]]:
    """Keep probes whose self-reported location can be trusted.

    ``locate`` maps coordinates to the country that authoritatively
    contains them; a probe claiming another country is dropped.
    """
    kept, dropped = [], []
    for p in probes:
        if "flagged_misgeolocated" in p.flags:
            dropped.append(DroppedProbe(p, "flagged as misgeolocated"))
        elif p.probe_id in config.excluded_probe_ids:
            dropped.append(DroppedProbe(p, "probe excluded"))
        elif locate is not None and (actual := locate(p.lat, p.lon)) is not None and actual != p.country:
            dropped.append(DroppedProbe(p, f"self-reported location mismatch ({p.country} vs {actual})"))
        else:
            kept.append(p)
    return kept, dropped


class BoxLocator:
    """Coordinates to country via bounding boxes; the smallest containing box wins.

    Nested boxes let a small territory (HK) override the surrounding one (CN).
    """

    def __init__(self, boxes: Iterable[tuple[str, float, float, float, float]]):
        self.boxes = sorted(
            ((abs(x1 - x0) * abs(y1 - y0), c.upper(), x0, y0, x1, y1) for c, x0, y0, x1, y1 in boxes),
        )

    def __call__(self, lat: float, lon: float) -> Optional[str]:
        for _, country, lat0, lon0, lat1, lon1 in self.boxes:
            if lat0 <= lat <= lat1 and lon0 <= lon <= lon1:
                return country
        return None

    @classmethod
    def from_csv(cls, path: str) -> "BoxLocator":
        """CSV ``country,min_lat,min_lon,max_lat,max_lon``."""
        import csv

        boxes = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] == "country":
                    continue
                boxes.append((row[0].strip(), *(float(v) for v in row[1:5])))
        return cls(boxes)
