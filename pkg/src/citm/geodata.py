"""Lookup indexes (geolocation, origin AS, anycast, hostname hints) and distance math."""

from __future__ import annotations

import csv
import functools
import ipaddress
import math
import re
import socket
from dataclasses import dataclass
from typing import Generic, Iterable, Iterator, Optional, TypeVar

EARTH_RADIUS_KM = 6371.0

V = TypeVar("V")

_OCTET = r"(?:25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])"
_DOTTED_QUAD = re.compile(rf"{_OCTET}\.{_OCTET}\.{_OCTET}\.{_OCTET}")


class UnknownCountry(KeyError):
    def __str__(self) -> str:
        return f"no reference points for country {self.args[0]!r}"


def dotted_quad(text: str) -> Optional[int]:
    """Integer value of a canonical dotted quad, else None.

    ``ipaddress`` is several times slower and addresses are parsed hundreds
    of thousands of times per run.
    """
    if _DOTTED_QUAD.fullmatch(text) is None:
        return None
    return int.from_bytes(socket.inet_aton(text), "big")


@functools.lru_cache(maxsize=1 << 16)
def ip_to_int(ip: str) -> int:
    value = dotted_quad(ip)
    if value is None:
        return int(ipaddress.IPv4Address(ip))
    return value


def parse_cidr(text: str) -> ipaddress.IPv4Network:
    return ipaddress.IPv4Network(text.strip(), strict=False)


class PrefixIndex(Generic[V]):
    """Longest-prefix match over IPv4 prefixes.

    One hash table per prefix length; a lookup probes the populated lengths
    from most to least specific. A repeated prefix keeps the later value.
    """

    def __init__(self, entries: Iterable[tuple[ipaddress.IPv4Network, V]] = ()):
        self._tables: dict[int, dict[int, V]] = {}
        for net, value in entries:
            self._tables.setdefault(net.prefixlen, {})[int(net.network_address)] = value
        self._lengths = sorted(self._tables, reverse=True)
        self._masks = {n: (0xFFFFFFFF << (32 - n)) & 0xFFFFFFFF for n in self._lengths}

    def __len__(self) -> int:
        return sum(len(t) for t in self._tables.values())

    def lookup_int(self, addr: int) -> Optional[V]:
        for n in self._lengths:
            hit = self._tables[n].get(addr & self._masks[n])
            if hit is not None:
                return hit
        return None

    def lookup(self, ip: str) -> Optional[V]:
        return self.lookup_int(ip_to_int(ip))

    def match(self, ip: str) -> Optional[tuple[ipaddress.IPv4Network, V]]:
        """Matching prefix together with its value."""
        addr = ip_to_int(ip)
        for n in self._lengths:
            net = addr & self._masks[n]
            hit = self._tables[n].get(net)
            if hit is not None:
                return ipaddress.IPv4Network((net, n)), hit
        return None

    def __contains__(self, ip: str) -> bool:
        return self.lookup(ip) is not None

    def items(self) -> Iterator[tuple[ipaddress.IPv4Network, V]]:
        for n in sorted(self._tables):
            for net, value in sorted(self._tables[n].items()):
                yield ipaddress.IPv4Network((net, n)), value


@dataclass(frozen=True)
class GeoRecord:
    prefix: str
    country: str
    lat: Optional[float] = None
    lon: Optional[float] = None

    @property
    def coords(self) -> Optional[tuple[float, float]]:
        if self.lat is None or self.lon is None:
            return None
        return (self.lat, self.lon)


def _check_coords(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValueError(f"coordinates out of range: {lat}, {lon}")


class GeoIndex:
    def __init__(self, records: Iterable[GeoRecord]):
        entries = []
        for rec in records:
            if rec.coords is not None:
                _check_coords(*rec.coords)
            entries.append((parse_cidr(rec.prefix), rec))
        self._index: PrefixIndex[GeoRecord] = PrefixIndex(entries)

    def __len__(self) -> int:
        return len(self._index)

    def geolocate(self, ip: str) -> Optional[GeoRecord]:
        return self._index.lookup(ip)

    def countries(self) -> set[str]:
        return {rec.country for _, rec in self._index.items()}

    @classmethod
    def from_csv(cls, path: str) -> "GeoIndex":
        """CSV ``prefix,country,lat,lon``; coordinates may be blank."""
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] == "prefix":
                    continue
                lat = float(row[2]) if len(row) > 2 and row[2].strip() else None
                lon = float(row[3]) if len(row) > 3 and row[3].strip() else None
                records.append(GeoRecord(row[0].strip(), row[1].strip().upper(), lat, lon))
        return cls(records)


class Pfx2AsIndex:
    def __init__(self, entries: Iterable[tuple[str, int]]):
        self._index: PrefixIndex[int] = PrefixIndex((parse_cidr(p), int(a)) for p, a in entries)

    def __len__(self) -> int:
        return len(self._index)

    def asn_of(self, ip: str) -> Optional[int]:
        return self._index.lookup(ip)

    def prefix_of(self, ip: str) -> Optional[str]:
        hit = self._index.match(ip)
        return str(hit[0]) if hit else None

    @classmethod
    def from_tsv(cls, path: str) -> "Pfx2AsIndex":
        """``prefix<TAB>asn`` or CAIDA's ``network<TAB>length<TAB>asn``.

        Multi-origin entries (``3491_31713``) and AS sets (``1,2``) keep the
        first listed ASN.
        """
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                cols = line.split()
                if len(cols) >= 3:
                    prefix, asn = f"{cols[0]}/{cols[1]}", cols[2]
                else:
                    prefix, asn = cols[0], cols[1]
                asn = re.split(r"[_,]", asn)[0]
                entries.append((prefix, int(asn)))
        return cls(entries)


class AnycastIndex:
    def __init__(self, entries: Iterable[tuple[str, Iterable[str]]]):
        self._map: dict[str, frozenset[str]] = {}
        for ip, countries in entries:
            cs = frozenset(c.strip().upper() for c in countries if c.strip())
            if not cs:
                raise ValueError(f"anycast entry {ip} has no countries")
            self._map[str(ipaddress.IPv4Address(ip))] = cs

    def __len__(self) -> int:
        return len(self._map)

    def anycast_countries(self, ip: str) -> Optional[frozenset[str]]:
        return self._map.get(ip)

    @classmethod
    def from_csv(cls, path: str) -> "AnycastIndex":
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] == "ip":
                    continue
                entries.append((row[0].strip(), row[1].split("|")))
        return cls(entries)


@dataclass(frozen=True)
class HostnameHintRule:
    pattern: re.Pattern
    country: str


class HintRules:
    """Ordered hostname regexes; the first match decides."""

    def __init__(self, rules: Iterable[tuple[str, str]] = ()):
        self.rules = [HostnameHintRule(re.compile(p, re.IGNORECASE), c.upper()) for p, c in rules]

    def hint_country(self, hostname: Optional[str]) -> Optional[str]:
        if not hostname:
            return None
        for rule in self.rules:
            if rule.pattern.search(hostname):
                return rule.country
        return None

    @classmethod
    def from_file(cls, path: str) -> "HintRules":
        rules = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                pattern, country = line.rsplit("\t", 1)
                rules.append((pattern, country.strip()))
        return cls(rules)


def load_hostnames(path: str) -> dict[str, str]:
    """CSV ``ip,hostname``."""
    table = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if len(row) < 2 or row[0].startswith("#") or row[0] == "ip":
                continue
            table[row[0].strip()] = row[1].strip().lower()
    return table


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


class CountryPoints:
    """Representative coordinates (population and exchange centres) per country."""

    def __init__(self, points: dict[str, list[tuple[float, float]]]):
        for country, pts in points.items():
            if not pts:
                raise ValueError(f"country {country} has no points")
            for p in pts:
                _check_coords(*p)
        self._points = {c.upper(): tuple(pts) for c, pts in points.items()}
        self._nearest: dict[tuple[tuple[float, float], str], float] = {}

    def __contains__(self, country: str) -> bool:
        return country in self._points

    def points(self, country: str) -> tuple[tuple[float, float], ...]:
        try:
            return self._points[country]
        except KeyError:
            raise UnknownCountry(country) from None

    def countries(self) -> set[str]:
        return set(self._points)

    def min_distance_km(
        self,
        origin: tuple[float, float],
        country: str,
        hop_coords: Optional[tuple[float, float]] = None,
    ) -> float:
        """Smallest distance from ``origin`` to the country's candidate points.

        The hop's own coordinates, when the geolocation database has them,
        join the candidate set. Taking the minimum makes the distance as
        hard as possible to violate.
        """
        key = (origin, country)
        best = self._nearest.get(key)
        if best is None:
            # probes are few, so (origin, country) pairs repeat across paths
            best = self._nearest[key] = min(haversine_km(origin, p) for p in self.points(country))
        if hop_coords is not None:
            best = min(best, haversine_km(origin, hop_coords))
        return best

    def missing(self, countries: Iterable[str]) -> set[str]:
        return {c for c in countries if c not in self._points}

    @classmethod
    def from_csv(cls, path: str) -> "CountryPoints":
        """CSV ``country,lat,lon`` with one row per point."""
        with open(path, newline="", encoding="utf-8") as fh:
            return cls(_read_points(fh))

    @classmethod
    def bundled(cls) -> "CountryPoints":
        from importlib.resources import files

        with files("citm.data").joinpath("country_points.csv").open("r", encoding="utf-8") as fh:
            return cls(_read_points(fh))


def _read_points(fh) -> dict[str, list[tuple[float, float]]]:
    pts: dict[str, list[tuple[float, float]]] = {}
    for row in csv.reader(fh):
        if not row or row[0].startswith("#") or row[0] == "country":
            continue
        pts.setdefault(row[0].strip().upper(), []).append((float(row[1]), float(row[2])))
    return pts
