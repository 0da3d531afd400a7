"""Target curation: seed domains, certificate expansion, liveness, sampling,
probe selection, and the human review queue."""

from __future__ import annotations

import csv
import ipaddress
import json
import os
import random
import socket
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Optional, Protocol

from .geodata import Pfx2AsIndex
from .ingest import ProbeRecord

PENDING, GOVERNMENT, REJECTED = "pending", "government", "rejected"
VERDICTS = (PENDING, GOVERNMENT, REJECTED)


class CurateError(ValueError):
    pass


class SuffixTable:
    """Public-suffix rules in publicsuffix.org list format (wildcards and exceptions)."""

    def __init__(self, rules: Iterable[str]):
        self.rules: set[str] = set()
        self.wildcards: set[str] = set()
        self.exceptions: set[str] = set()
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            rule = rule.split()[0]
            if rule.startswith("!"):
                self.exceptions.add(rule[1:])
            elif rule.startswith("*."):
                self.wildcards.add(rule[2:])
            else:
                self.rules.add(rule)

    @classmethod
    def from_file(cls, path: str) -> "SuffixTable":
        with open(path, encoding="utf-8") as fh:
            return cls(fh)

    def public_suffix(self, hostname: str) -> str:
        labels = hostname.lower().strip(".").split(".")
        best = 1  # implicit "*" rule
        for i in range(len(labels)):
            cand = ".".join(labels[i:])
            n = len(labels) - i
            if cand in self.exceptions:
                return ".".join(labels[i + 1 :])
            if cand in self.rules:
                best = max(best, n)
            if i > 0 and cand in self.wildcards:
                best = max(best, n + 1)
        return ".".join(labels[-best:])


def hostname_of(url: str) -> str:
    parsed = urllib.parse.urlsplit(url if "//" in url else f"//{url}")
    host = (parsed.hostname or "").strip(".").lower()
    if not host:
        raise CurateError(f"no hostname in {url!r}")
    return host


def extract_etld1(url: str, suffixes: SuffixTable) -> str:
    host = hostname_of(url)
    try:
        ipaddress.ip_address(host)
    except ValueError:
        pass
    else:
        raise CurateError(f"{url!r} is an IP literal")
    suffix = suffixes.public_suffix(host)
    if host == suffix:
        raise CurateError(f"{host!r} is a public suffix")
    labels = host.split(".")
    return ".".join(labels[-(suffix.count(".") + 2) :])


@dataclass(frozen=True)
class SeedDomain:
    url: str
    etld1: str
    country: str
    source: str


def load_seeds(path: str, suffixes: SuffixTable) -> tuple[list[SeedDomain], list[str]]:
    """CSV ``url,country,source``; unusable rows are reported, not fatal."""
    seeds, errors = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#") or row[0] == "url":
                continue
            url, country = row[0].strip(), row[1].strip().upper()
            source = row[2].strip() if len(row) > 2 else "manual"
            try:
                seeds.append(SeedDomain(url, extract_etld1(url, suffixes), country, source))
            except CurateError as exc:
                errors.append(f"line {lineno}: {exc}")
    return seeds, errors


@dataclass(frozen=True)
class TargetCandidate:
    fqdn: str
    etld1: str
    country: str
    source: str = "certificate"
    resolved_ips: tuple[str, ...] = ()
    asn: Optional[int] = None
    prefix: Optional[str] = None
    port443_open: bool = False
    review_verdict: str = PENDING

    @property
    def candidate_id(self) -> str:
        return f"{self.country}:{self.fqdn}"

    @property
    def primary_ip(self) -> Optional[str]:
        return self.resolved_ips[0] if self.resolved_ips else None

    @property
    def eligible(self) -> bool:
        return self.port443_open and self.review_verdict == GOVERNMENT


class CertProvider(Protocol):
    def names_under(self, domain: str) -> Iterable[str]: ...


class Resolver(Protocol):
    def resolve(self, fqdn: str) -> list[str]: ...


class PortProber(Protocol):
    def is_open(self, ip: str, port: int) -> bool: ...


class OfflineCertProvider:
    """One answer file per queried domain: ``<dir>/<domain>.txt``, one name per line."""

    def __init__(self, directory: str):
        if not os.path.isdir(directory):
            raise FileNotFoundError(directory)
        self.directory = directory

    def names_under(self, domain: str) -> list[str]:
        path = os.path.join(self.directory, f"{domain}.txt")
        if not os.path.exists(path):
            raise LookupError(f"no certificate answers for {domain}")
        with open(path, encoding="utf-8") as fh:
            return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


class CrtShProvider:
    """Live certificate-transparency search against crt.sh."""

    url = "https://crt.sh/?q=%25.{domain}&output=json"

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout

    def names_under(self, domain: str) -> list[str]:
        with urllib.request.urlopen(self.url.format(domain=domain), timeout=self.timeout) as resp:
            entries = json.load(resp)
        names = set()
        for e in entries:
            names.update(e.get("name_value", "").split("\n"))
        return sorted(n for n in names if n)


class OfflineResolver:
    """Answer file: ``fqdn<TAB>ip [ip ...]``, or ``fqdn<TAB>NXDOMAIN``."""

    def __init__(self, path: str):
        self.answers: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip() or line.startswith("#"):
                    continue
                name, _, rest = line.strip().partition("\t")
                ips = [] if rest.strip().upper() == "NXDOMAIN" else rest.split()
                self.answers[name.lower()] = ips

    def resolve(self, fqdn: str) -> list[str]:
        return list(self.answers.get(fqdn, []))


class OfflinePortProber:
    """Answer file: ``ip<TAB>open|closed|timeout``; unlisted addresses are closed."""

    def __init__(self, path: str):
        self.answers: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip() or line.startswith("#"):
                    continue
                ip, state = line.split()[:2]
                self.answers[ip] = state.lower()

    def is_open(self, ip: str, port: int = 443) -> bool:
        state = self.answers.get(ip, "closed")
        if state == "timeout":
            raise TimeoutError(ip)
        return state == "open"


class SocketResolver:
    def resolve(self, fqdn: str) -> list[str]:
        try:
            infos = socket.getaddrinfo(fqdn, 443, socket.AF_INET, socket.SOCK_STREAM)
        except socket.gaierror:
            return []
        return list(dict.fromkeys(info[4][0] for info in infos))


class SocketPortProber:
    def __init__(self, timeout: float = 3.0):
        self.timeout = timeout

    def is_open(self, ip: str, port: int = 443) -> bool:
        try:
            with socket.create_connection((ip, port), timeout=self.timeout):
                return True
        except OSError:
            return False


@dataclass
class ExpandResult:
    candidates: list[TargetCandidate] = field(default_factory=list)
    log: list[str] = field(default_factory=list)


def is_subdomain(name: str, domain: str) -> bool:
    return name == domain or name.endswith("." + domain)


def expand_candidates(seeds: Iterable[SeedDomain], provider: CertProvider) -> ExpandResult:
    """Names from certificates that fall under a seed's registrable domain.

    Certificate trust is deliberately not checked. Hostnames of the seed
    URLs themselves are always candidates and keep the seed's source tag;
    everything else is tagged ``certificate``. The first seed to yield a
    name decides its country; later conflicts are logged.
    """
    seeds = list(seeds)
    out = ExpandResult()
    seed_hosts: dict[str, str] = {}
    for s in seeds:
        seed_hosts.setdefault(hostname_of(s.url), s.source)
    by_name: dict[str, TargetCandidate] = {}
    queried: set[str] = set()
    for seed in seeds:
        names = [hostname_of(seed.url)]
        if seed.etld1 not in queried:
            queried.add(seed.etld1)
            try:
                names += list(provider.names_under(seed.etld1))
            except Exception as exc:  # provider failures are per-seed
                out.log.append(f"provider failed for {seed.etld1}: {exc}")
        for raw in names:
            name = raw.strip().lower().rstrip(".")
            if name.startswith("*."):
                name = name[2:]
            if not name or not is_subdomain(name, seed.etld1):
                continue
            prev = by_name.get(name)
            if prev is None:
                source = seed_hosts.get(name, "certificate")
                by_name[name] = TargetCandidate(name, seed.etld1, seed.country, source)
            elif prev.country != seed.country:
                out.log.append(f"{name}: country conflict {prev.country} vs {seed.country}; kept {prev.country}")
    out.candidates = sorted(by_name.values(), key=lambda c: (c.country, c.fqdn))
    return out


def check_liveness(
    candidate: TargetCandidate,
    resolver: Resolver,
    prober: PortProber,
    pfx2as: Optional[Pfx2AsIndex] = None,
) -> TargetCandidate:
    """Resolve and test TCP/443. Page content is never fetched."""
    ips = tuple(resolver.resolve(candidate.fqdn))
    is_open = False
    for ip in ips:
        try:
            if prober.is_open(ip, 443):
                is_open = True
                break
        except (TimeoutError, OSError):
            continue
    asn = prefix = None
    if ips and pfx2as is not None:
        asn, prefix = pfx2as.asn_of(ips[0]), pfx2as.prefix_of(ips[0])
    return replace(candidate, resolved_ips=ips, port443_open=is_open, asn=asn, prefix=prefix)


def check_all(candidates, resolver, prober, pfx2as=None, parallel: int = 1) -> list[TargetCandidate]:
    if parallel <= 1:
        return [check_liveness(c, resolver, prober, pfx2as) for c in candidates]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(lambda c: check_liveness(c, resolver, prober, pfx2as), candidates))


def _diversity_key(c: TargetCandidate):
    return c.asn, c.prefix, c.primary_ip


def diversity_score(selected: Iterable[TargetCandidate]) -> tuple[int, int, int]:
    """(distinct ASes, distinct prefixes, distinct IPs); unannounced space counts only as IPs."""
    sel = list(selected)
    return (
        len({c.asn for c in sel if c.asn is not None}),
        len({c.prefix for c in sel if c.prefix is not None}),
        len({c.primary_ip for c in sel if c.primary_ip is not None}),
    )


def sample_targets(candidates: Iterable[TargetCandidate], cap: int = 100) -> list[TargetCandidate]:
    """Greedy diversity sampling over eligible candidates.

    Each step takes the lexicographically first FQDN that adds a new origin
    AS; failing that a new prefix, then a new IP, then anything left.
    """
    pool = sorted((c for c in candidates if c.eligible), key=lambda c: c.fqdn)
    chosen: list[TargetCandidate] = []
    ases: set = set()
    prefixes: set = set()
    ips: set = set()
    while pool and len(chosen) < cap:
        pick = (
            next((c for c in pool if c.asn is not None and c.asn not in ases), None)
            or next((c for c in pool if c.prefix is not None and c.prefix not in prefixes), None)
            or next((c for c in pool if c.primary_ip is not None and c.primary_ip not in ips), None)
            or pool[0]
        )
        pool.remove(pick)
        chosen.append(pick)
        ases.add(pick.asn)
        prefixes.add(pick.prefix)
        ips.add(pick.primary_ip)
    return chosen


def sample_official_first(
    candidates: Iterable[TargetCandidate], cap: int = 100, seed: int = 0
) -> list[TargetCandidate]:
    """Official-source targets first (sorted), then a seeded random draw of the rest."""
    eligible = sorted((c for c in candidates if c.eligible), key=lambda c: c.fqdn)
    official = [c for c in eligible if c.source != "certificate"]
    rest = [c for c in eligible if c.source == "certificate"]
    random.Random(seed).shuffle(rest)
    return (official + rest)[:cap]


def sample_by_country(candidates, mode: str = "greedy", cap: int = 100, seed: int = 0) -> dict[str, list]:
    groups: dict[str, list[TargetCandidate]] = {}
    for c in candidates:
        groups.setdefault(c.country, []).append(c)
    out = {}
    for country in sorted(groups):
        if mode == "greedy":
            out[country] = sample_targets(groups[country], cap)
        elif mode == "official-first-random":
            out[country] = sample_official_first(groups[country], cap, seed)
        else:
            raise CurateError(f"unknown sampling mode {mode!r}")
    return out


def probe_sort_key(probe_id: str):
    return (0, int(probe_id), "") if probe_id.isdigit() else (1, 0, probe_id)


@dataclass(frozen=True)
class ProbeSelection:
    country: str
    probe_ids: tuple[str, ...]
    rationale: tuple[str, ...]


def select_probes(probes: Iterable[ProbeRecord], cap: int = 10) -> dict[str, ProbeSelection]:
    """Per country: one probe per AS first, then round-robin across ASes.

    ASes are visited in ascending ASN order (unknown AS last), probes within
    an AS by ascending probe id. Countries with at most ``cap`` probes keep
    all of them.
    """
    by_country: dict[str, list[ProbeRecord]] = {}
    for p in probes:
        by_country.setdefault(p.country, []).append(p)
    out = {}
    for country in sorted(by_country):
        by_as: dict[Optional[int], list[ProbeRecord]] = {}
        for p in by_country[country]:
            by_as.setdefault(p.asn, []).append(p)
        order = sorted(by_as, key=lambda a: (a is None, a or 0))
        queues = {a: sorted(by_as[a], key=lambda p: probe_sort_key(p.probe_id)) for a in order}
        ids, why = [], []
        rnd = 0
        while len(ids) < cap and any(rnd < len(q) for q in queues.values()):
            for a in order:
                if len(ids) >= cap:
                    break
                if rnd < len(queues[a]):
                    ids.append(queues[a][rnd].probe_id)
                    label = "unknown AS" if a is None else f"AS{a}"
                    why.append(f"{label} " + ("first of AS" if rnd == 0 else f"round {rnd + 1}"))
            rnd += 1
        out[country] = ProbeSelection(country, tuple(ids), tuple(why))
    return out


REVIEW_FIELDS = ("candidate_id", "fqdn", "country", "verdict")


def write_review_queue(candidates: Iterable[TargetCandidate], fh: IO[str]) -> int:
    """Export pending candidates for manual inspection. Returns the row count."""
    rows = sorted((c for c in candidates if c.review_verdict == PENDING), key=lambda c: c.candidate_id)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REVIEW_FIELDS)
    for c in rows:
        w.writerow((c.candidate_id, c.fqdn, c.country, c.review_verdict))
    return len(rows)


def import_verdicts(
    candidates: Iterable[TargetCandidate], fh: IO[str]
) -> tuple[list[TargetCandidate], list[str]]:
    """Apply a filled-in review file; bad rows are reported and skipped."""
    cands = list(candidates)
    index = {c.candidate_id: i for i, c in enumerate(cands)}
    errors = []
    for lineno, row in enumerate(csv.DictReader(fh), start=2):
        cid = (row.get("candidate_id") or "").strip()
        verdict = (row.get("verdict") or "").strip().lower()
        if cid not in index:
            errors.append(f"line {lineno}: unknown candidate {cid!r}")
            continue
        if verdict not in (GOVERNMENT, REJECTED, PENDING):
            errors.append(f"line {lineno}: bad verdict {verdict!r} for {cid}")
            continue
        i = index[cid]
        cands[i] = replace(cands[i], review_verdict=verdict)
    return cands, errors


CANDIDATE_FIELDS = (
    "candidate_id", "fqdn", "etld1", "country", "source", "resolved_ips", "asn", "prefix", "port443_open", "verdict",
)


def candidate_row(c: TargetCandidate) -> tuple:
    return (
        c.candidate_id, c.fqdn, c.etld1, c.country, c.source, " ".join(c.resolved_ips),
        "" if c.asn is None else c.asn, c.prefix or "", int(c.port443_open), c.review_verdict,
    )
