"""Parsing of traceroute results and probe metadata.

Traceroute records follow the line-delimited result format of RIPE Atlas
(``msm_id, prb_id, src_addr, dst_addr, dst_name, proto, timestamp, result``),
so real exports load unmodified.
"""

from __future__ import annotations

import functools
import ipaddress
import json
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Mapping, Optional

from .geodata import dotted_quad

PROTOCOLS = ("ICMP", "TCP", "UDP")
PROBE_FLAGS = frozenset({"datacenter", "anchor", "flagged_misgeolocated"})


@dataclass(frozen=True)
class HopReply:
    from_ip: Optional[str] = None
    rtt_ms: Optional[float] = None
    ttl: Optional[int] = None

    @property
    def labeled(self) -> bool:
        return self.from_ip is not None


UNLABELED = HopReply()


@dataclass(frozen=True)
class Hop:
    index: int
    replies: tuple[HopReply, ...]

    @property
    def labeled(self) -> bool:
        return any(r.from_ip is not None for r in self.replies)

    def ips(self) -> list[str]:
        """Distinct reply IPs in first-seen order."""
        seen: list[str] = []
        for r in self.replies:
            if r.from_ip is not None and r.from_ip not in seen:
                seen.append(r.from_ip)
        return seen

    def min_rtt(self, ip: str) -> Optional[float]:
        rtts = [r.rtt_ms for r in self.replies if r.from_ip == ip and r.rtt_ms is not None]
        return min(rtts) if rtts else None


@dataclass(frozen=True)
class TraceroutePath:
    measurement_id: str
    probe_id: str
    src_country: str
    src_ip: str
    dst_fqdn: str
    dst_ip: str
    protocol: str
    timestamp: int
    hops: tuple[Hop, ...]
    log: tuple[str, ...] = ()

    @property
    def path_id(self) -> str:
        return f"{self.measurement_id}:{self.probe_id}:{self.timestamp}"

    def with_note(self, *notes: str) -> "TraceroutePath":
        return replace(self, log=self.log + tuple(notes))

    def reply_ips(self) -> Iterator[str]:
        for hop in self.hops:
            for r in hop.replies:
                if r.from_ip is not None:
                    yield r.from_ip


@dataclass(frozen=True)
class ProbeRecord:
    probe_id: str
    country: str
    lat: float
    lon: float
    asn: Optional[int] = None
    flags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ParseError:
    line: int
    message: str
    field: Optional[str] = None

    def __str__(self) -> str:
        where = f" [{self.field}]" if self.field else ""
        return f"line {self.line}{where}: {self.message}"


@dataclass
class ParseResult:
    items: list = field(default_factory=list)
    errors: list[ParseError] = field(default_factory=list)

    @property
    def n_records(self) -> int:
        return len(self.items) + len(self.errors)


class RecordError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class UnsupportedFamily(RecordError):
    """IPv6 measurements are out of scope."""


@functools.lru_cache(maxsize=1 << 16)
def _canonical_ip(text: str):
    """(version, canonical text), or None when unparseable. Router addresses repeat a lot."""
    try:
        addr = ipaddress.ip_address(text)
    except ValueError:
        return None
    return addr.version, str(addr)


def _ipv4(value, name: str) -> str:
    if value is None:
        raise RecordError(f"missing {name}", name)
    if isinstance(value, str) and dotted_quad(value) is not None:
        return value
    parsed = _canonical_ip(str(value))
    if parsed is None:
        raise RecordError(f"unparseable address {value!r}", name)
    if parsed[0] != 4:
        raise UnsupportedFamily(f"unsupported family: IPv6 address {value}", name)
    return parsed[1]


def _parse_reply(entry: dict) -> HopReply:
    if "from" not in entry:
        # {"x": "*"}, {"err": ...} and friends carry no source
        return UNLABELED
    ip = _ipv4(entry["from"], "from")
    rtt = entry.get("rtt")
    if rtt is not None:
        rtt = float(rtt)
        if rtt < 0:
            raise RecordError(f"negative rtt {rtt}", "rtt")
    ttl = entry.get("ttl")
    return HopReply(ip, rtt, int(ttl) if ttl is not None else None)


def _parse_hops(result) -> tuple[Hop, ...]:
    if not isinstance(result, list) or not result:
        raise RecordError("result must be a nonempty array of hops", "result")
    hops = []
    last = 0
    for entry in result:
        if not isinstance(entry, dict) or "hop" not in entry:
            raise RecordError("hop entry without 'hop' index", "result")
        idx = int(entry["hop"])
        if idx <= last:
            raise RecordError(f"hop index {idx} not increasing", "result")
        last = idx
        replies = tuple(_parse_reply(r) for r in entry.get("result") or [] if isinstance(r, dict))
        hops.append(Hop(idx, replies or (UNLABELED,)))
    return tuple(hops)


def parse_traceroute_record(
    rec: dict,
    probe_countries: Optional[Mapping[str, str]] = None,
) -> TraceroutePath:
    if not isinstance(rec, dict):
        raise RecordError("record is not an object")
    if rec.get("af") == 6:
        raise UnsupportedFamily("unsupported family: af=6", "af")
    for name in ("msm_id", "prb_id", "dst_addr", "result"):
        if rec.get(name) is None:
            raise RecordError(f"missing {name}", name)
    probe_id = str(rec["prb_id"])
    dst_ip = _ipv4(rec["dst_addr"], "dst_addr")
    src_ip = _ipv4(rec.get("from") or rec.get("src_addr"), "src_addr")
    proto = str(rec.get("proto", "ICMP")).upper()
    if proto not in PROTOCOLS:
        raise RecordError(f"unknown protocol {proto!r}", "proto")
    country = rec.get("src_country")
    if country is None and probe_countries is not None:
        country = probe_countries.get(probe_id)
    if not country:
        raise RecordError(f"no source country for probe {probe_id}", "src_country")
    return TraceroutePath(
        measurement_id=str(rec["msm_id"]),
        probe_id=probe_id,
        src_country=str(country).upper(),
        src_ip=src_ip,
        dst_fqdn=str(rec.get("dst_name") or dst_ip).lower(),
        dst_ip=dst_ip,
        protocol=proto,
        timestamp=int(rec.get("timestamp", 0)),
        hops=_parse_hops(rec["result"]),
    )


def _lines(stream: IO[str] | Iterable[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_traceroutes(
    stream: IO[str] | Iterable[str],
    probe_countries: Optional[Mapping[str, str]] = None,
) -> ParseResult:
    """Parse line-delimited traceroute records.

    The source country comes from the record's ``src_country`` field when
    present, else from ``probe_countries`` keyed by probe id. Malformed
    lines are reported in ``errors``; parsing never aborts on them.
    """
    out = ParseResult()
    for lineno, line in _lines(stream):
        try:
            rec = json.loads(line)
            out.items.append(parse_traceroute_record(rec, probe_countries))
        except json.JSONDecodeError as exc:
            out.errors.append(ParseError(lineno, f"invalid JSON: {exc.msg}"))
        except RecordError as exc:
            out.errors.append(ParseError(lineno, str(exc), exc.field))
        except (TypeError, ValueError) as exc:
            out.errors.append(ParseError(lineno, str(exc)))
    return out


def serialize_path(path: TraceroutePath) -> dict:
    """Inverse of :func:`parse_traceroute_record` in the input schema."""
    result = []
    for hop in path.hops:
        replies = []
        for r in hop.replies:
            if r.from_ip is None:
                replies.append({"x": "*"})
                continue
            d: dict = {"from": r.from_ip}
            if r.rtt_ms is not None:
                d["rtt"] = r.rtt_ms
            if r.ttl is not None:
                d["ttl"] = r.ttl
            replies.append(d)
        result.append({"hop": hop.index, "result": replies})
    return {
        "msm_id": path.measurement_id,
        "prb_id": path.probe_id,
        "src_addr": path.src_ip,
        "src_country": path.src_country,
        "dst_addr": path.dst_ip,
        "dst_name": path.dst_fqdn,
        "proto": path.protocol,
        "timestamp": path.timestamp,
        "result": result,
    }


_PROBE_ALIASES = {
    "probe_id": ("probe_id", "id", "prb_id"),
    "country": ("country", "country_code"),
    "lat": ("lat", "latitude"),
    "lon": ("lon", "longitude"),
    "asn": ("asn", "asn_v4"),
}


def _pick(rec: dict, key: str):
    for alias in _PROBE_ALIASES[key]:
        if rec.get(alias) is not None:
            return rec[alias]
    return None


def parse_probe_record(rec: dict) -> ProbeRecord:
    if not isinstance(rec, dict):
        raise RecordError("record is not an object")
    values = {k: _pick(rec, k) for k in _PROBE_ALIASES}
    for k in ("probe_id", "country", "lat", "lon"):
        if values[k] is None:
            raise RecordError(f"missing {k}", k)
    lat, lon = float(values["lat"]), float(values["lon"])
    if not -90.0 <= lat <= 90.0:
        raise RecordError(f"latitude {lat} out of range", "lat")
    if not -180.0 <= lon <= 180.0:
        raise RecordError(f"longitude {lon} out of range", "lon")
    flags = set(rec.get("flags") or ())
    if rec.get("is_anchor"):
        flags.add("anchor")
    unknown = flags - PROBE_FLAGS
    if unknown:
        raise RecordError(f"unknown flags {sorted(unknown)}", "flags")
    asn = values["asn"]
    return ProbeRecord(
        probe_id=str(values["probe_id"]),
        country=str(values["country"]).upper(),
        lat=lat,
        lon=lon,
        asn=int(asn) if asn is not None else None,
        flags=frozenset(flags),
    )


def parse_probes(stream: IO[str] | Iterable[str]) -> ParseResult:
    """Parse probe metadata, one JSON object per line.

    A repeated probe id keeps the first record and reports the later one
    with both line numbers.
    """
    out = ParseResult()
    first_line: dict[str, int] = {}
    for lineno, line in _lines(stream):
        try:
            probe = parse_probe_record(json.loads(line))
        except json.JSONDecodeError as exc:
            out.errors.append(ParseError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        except RecordError as exc:
            out.errors.append(ParseError(lineno, str(exc), exc.field))
            continue
        except (TypeError, ValueError) as exc:
            out.errors.append(ParseError(lineno, str(exc)))
            continue
        if probe.probe_id in first_line:
            out.errors.append(
                ParseError(
                    lineno,
                    f"duplicate probe_id {probe.probe_id} (lines {first_line[probe.probe_id]} and {lineno})",
                    "probe_id",
                )
            )
            continue
        first_line[probe.probe_id] = lineno
        out.items.append(probe)
    return out


def serialize_probe(probe: ProbeRecord) -> dict:
    d: dict = {"probe_id": probe.probe_id, "country": probe.country, "lat": probe.lat, "lon": probe.lon}
    if probe.asn is not None:
        d["asn"] = probe.asn
    if probe.flags:
        d["flags"] = sorted(probe.flags)
    return d


def load_traceroutes(paths: Iterable[str], probe_countries=None) -> ParseResult:
    out = ParseResult()
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            part = parse_traceroutes(fh, probe_countries)
        out.items.extend(part.items)
        out.errors.extend(ParseError(e.line, f"{p}: {e.message}", e.field) for e in part.errors)
    return out


def load_probes(path: str) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse_probes(fh)
