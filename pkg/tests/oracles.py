"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package: LPM is a linear scan through
``ipaddress``, great-circle distance goes through unit vectors and
``atan2``, and sampling optimality is checked by exhaustive search.
"""

import itertools
import ipaddress
import math
from datetime import date, timedelta

R_KM = 6371.0
C_KM_PER_MS = 299.792458


def lpm_linear(prefixes, ip):
    """prefixes: list of (cidr string, value). Longest match, later duplicate wins."""
    addr = ipaddress.ip_address(ip)
    best, best_len = None, -1
    for cidr, value in prefixes:
        net = ipaddress.ip_network(cidr)
        if addr in net and net.prefixlen >= best_len:
            best, best_len = value, net.prefixlen
    return best


def _unit(lat, lon):
    la, lo = math.radians(lat), math.radians(lon)
    return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))


def great_circle_km(a, b):
    u, v = _unit(*a), _unit(*b)
    cross = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
    dot = sum(x * y for x, y in zip(u, v))
    return R_KM * math.atan2(math.sqrt(sum(c * c for c in cross)), dot)


def min_distance_brute(origin, points, hop=None):
    cands = list(points) + ([hop] if hop is not None else [])
    return min(great_circle_km(origin, p) for p in cands)


def sol_violates(rtt_ms, distance_km, frac=2.0 / 3.0, divisor=2.0):
    """Reply too fast: needed time strictly greater than observed one-way time."""
    if rtt_ms is None:
        return False
    needed_ms = distance_km / (frac * C_KM_PER_MS)
    return rtt_ms / divisor < needed_ms


def longest_run_scan(labeled_flags):
    best = 0
    for i in range(len(labeled_flags)):
        j = i
        while j < len(labeled_flags) and not labeled_flags[j]:
            j += 1
        best = max(best, j - i)
    return best


def stable_by_days(days_seen, min_days):
    """True iff some window of min_days consecutive calendar days is fully present."""
    seen = set(days_seen)
    for d in seen:
        if all(d + timedelta(days=k) in seen for k in range(min_days)):
            return True
    return False


def diversity_objective(chosen):
    """(distinct ASes, distinct prefixes, distinct IPs) of a selection."""
    return (
        len({c.asn for c in chosen}),
        len({c.prefix for c in chosen}),
        len({c.primary_ip for c in chosen}),
    )


def best_objective(candidates, k):
    k = min(k, len(candidates))
    best = None
    for combo in itertools.combinations(candidates, k):
        obj = diversity_objective(combo)
        if best is None or obj > best:
            best = obj
    return best


def as_date(i):
    return date(2024, 1, 1) + timedelta(days=i)


def lpm_scan_table(prefixes):
    """Pre-split (cidr, value) pairs into integers for lpm_scan."""
    table = []
    for cidr, value in prefixes:
        net = ipaddress.ip_network(cidr)
        table.append((int(net.network_address), int(net.netmask), net.prefixlen, value))
    return table


def lpm_scan(table, ip):
    """Same contract as lpm_linear, on integers so 10k x 1k lookups stay tractable."""
    addr = int(ipaddress.ip_address(ip))
    best, best_len = None, -1
    for net, mask, plen, value in table:
        if addr & mask == net and plen >= best_len:
            best, best_len = value, plen
    return best
