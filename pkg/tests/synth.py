"""Seeded synthetic traceroutes over the corpus world (same geo, AS and probe files)."""

import json
import random

# source probe -> (country, addresses inside that country's /16 prefixes, destinations)
VANTAGE = {
    "6181": ("TW", "1.160", ["1.160.9.10", "1.160.9.11", "13.13.13.13", "6.40.9.10"]),
    "13218": ("KE", "8.60", ["8.60.9.10", "6.40.9.10", "13.13.13.13"]),
    "5001": ("AE", "9.70", ["9.70.9.10", "13.13.13.13", "3.10.9.10"]),
    "5002": ("JP", "4.20", ["4.20.9.10", "4.20.9.11", "5.31.200.10"]),
    "5003": ("BY", "17.0", ["17.0.9.10", "17.0.9.11"]),
    "5005": ("CA", "19.0", ["19.0.9.10", "5.31.200.20"]),
    "5006": ("US", "5.30", ["5.31.200.10", "5.31.200.20", "19.0.9.10"]),
    "5008": ("PH", "24.0", ["24.0.9.10", "3.10.9.10"]),
}
FOREIGN = ["2.100", "3.10", "4.20", "5.30", "5.32", "6.40", "7.50", "12.80", "13.90", "14.10", "16.0",
           "18.0", "20.0", "21.0", "23.0", "11.4"]
PRIVATE = ["10.0.0.1", "192.168.1.1", "172.16.0.1", "100.64.0.1"]
PROTOCOLS = ["ICMP", "ICMP", "UDP", "TCP"]


def _addr(rng, prefix16):
    return f"{prefix16}.{rng.randrange(256)}.{rng.randrange(1, 255)}"


def make_record(rng, i):
    probe = rng.choice(sorted(VANTAGE))
    country, home, dsts = VANTAGE[probe]
    dst = rng.choice(dsts)
    n = rng.randint(6, 18)
    rtt = rng.uniform(0.2, 2.0)
    result = []
    hop = 0
    for k in range(n):
        hop += 1
        rtt += rng.uniform(0.1, 25.0)
        roll = rng.random()
        if roll < 0.15:
            replies = [{"x": "*"}] * 3
        else:
            if roll < 0.2:
                ip = rng.choice(PRIVATE)
            elif roll < 0.45:
                ip = _addr(rng, rng.choice(FOREIGN))
            else:
                ip = _addr(rng, home)
            fast = rng.random() < 0.1
            r = rng.uniform(0.3, 3.0) if fast else rtt
            replies = [{"from": ip, "rtt": round(r + j * rng.random(), 3), "size": 76, "ttl": 250} for j in range(3)]
        result.append({"hop": hop, "result": replies})
    if rng.random() < 0.7:
        result.append({"hop": hop + 1, "result": [{"from": dst, "rtt": round(rtt + 1, 3)}]})
    return {
        "af": 4,
        "msm_id": 70000000 + i // 100,
        "prb_id": int(probe),
        "src_addr": _addr(rng, home),
        "dst_addr": dst,
        "dst_name": f"site{i % 97}.example.{country.lower()}",
        "proto": rng.choice(PROTOCOLS),
        "timestamp": 1707000000 + i,
        "type": "traceroute",
        "result": result,
    }


def records(n, seed=0):
    rng = random.Random(seed)
    return [make_record(rng, i) for i in range(n)]


def write_jsonl(path, n, seed=0):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records(n, seed):
            fh.write(json.dumps(rec) + "\n")
