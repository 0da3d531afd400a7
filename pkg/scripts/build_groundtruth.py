"""Write the hand-built ground-truth corpus to tests/fixtures/corpus/.

Every case lists its hops and the outcome worked out by hand. RTTs are
chosen far from the speed-of-light bound so each verdict is obvious:
a plausible hop sits well above 2 * distance / 199.86 ms, an impossible
one well below it.

    python scripts/build_groundtruth.py
"""

from __future__ import annotations

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "corpus")

# country -> (/16 prefix, ASN, coordinates written into the geo table)
COUNTRIES = {
    "TW": ("1.160.0.0/16", 3462, (25.03, 121.57)),
    "HK": ("2.100.0.0/16", 3491, (22.32, 114.17)),
    "SG": ("3.10.0.0/16", 7473, (1.35, 103.82)),
    "JP": ("4.20.0.0/16", 2914, (35.68, 139.69)),
    "US": ("5.30.0.0/16", 3356, (39.04, -77.49)),
    "GB": ("6.40.0.0/16", 5400, (51.51, -0.13)),
    "ZA": ("7.50.0.0/16", 37100, (-26.20, 28.05)),
    "KE": ("8.60.0.0/16", 30844, (-1.29, 36.82)),
    "AE": ("9.70.0.0/16", 5384, (25.20, 55.27)),
    "TH": ("12.80.0.0/16", 4651, (13.76, 100.50)),
    "AU": ("13.90.0.0/16", 1221, (-33.87, 151.21)),
    "IN": ("14.10.0.0/16", 9498, (19.08, 72.88)),
    "ID": ("15.0.0.0/16", 7713, (-6.21, 106.85)),
    "KR": ("16.0.0.0/16", 4766, (37.57, 126.98)),
    "BY": ("17.0.0.0/16", 6697, (53.90, 27.57)),
    "CZ": ("18.0.0.0/16", 5610, (50.08, 14.44)),
    "CA": ("19.0.0.0/16", 577, (45.50, -73.57)),
    "BR": ("20.0.0.0/16", 28573, (-23.55, -46.63)),
    "CN": ("21.0.0.0/16", 4134, (39.90, 116.41)),
    "FR": ("23.0.0.0/16", 3215, (48.86, 2.35)),
    "PH": ("24.0.0.0/16", 9299, (14.60, 120.98)),
}
EXTRA_GEO = [
    ("5.31.0.0/16", "US", (39.04, -77.49)),  # Amazon
    ("5.32.0.0/16", "US", (41.88, -87.63)),  # Arelion
    ("13.13.0.0/16", "US", (37.77, -122.42)),  # anycast operator
    ("11.0.0.0/8", "US", (38.90, -77.04)),  # squatted DoD space
]
EXTRA_AS = [("5.31.0.0/16", 16509), ("5.32.0.0/16", 1299), ("13.13.0.0/16", 13335), ("11.0.0.0/8", 749)]
ANYCAST_IP = "13.13.13.13"
ANYCAST_SET = ["AU", "JP", "IN", "ID", "KR"]

PROBES = [
    {"probe_id": "6181", "country": "TW", "lat": 25.03, "lon": 121.56, "asn": 3462},
    {"probe_id": "1002754", "country": "TW", "lat": 25.05, "lon": 121.53, "asn": 3491},
    {"probe_id": "13218", "country": "KE", "lat": -1.29, "lon": 36.82, "asn": 30844},
    {"probe_id": "5001", "country": "AE", "lat": 25.20, "lon": 55.27, "asn": 5384},
    {"probe_id": "5002", "country": "JP", "lat": 35.68, "lon": 139.69, "asn": 2914},
    {"probe_id": "5003", "country": "BY", "lat": 53.90, "lon": 27.57, "asn": 6697},
    {"probe_id": "5004", "country": "BR", "lat": -23.55, "lon": -46.63, "asn": 28573},
    {"probe_id": "7113", "country": "BR", "lat": -22.91, "lon": -43.17, "asn": 28573},
    {"probe_id": "6493", "country": "CA", "lat": 43.65, "lon": -79.38, "asn": 577},
    {"probe_id": "5005", "country": "CA", "lat": 49.28, "lon": -123.12, "asn": 577},
    {"probe_id": "5006", "country": "US", "lat": 47.61, "lon": -122.33, "asn": 7018},
    {"probe_id": "5007", "country": "SG", "lat": 1.35, "lon": 103.82, "asn": 7473},
    {"probe_id": "7030", "country": "CN", "lat": 22.30, "lon": 114.20, "asn": 37963},
    {"probe_id": "5008", "country": "PH", "lat": 14.60, "lon": 120.98, "asn": 9299},
]
SRC_IP = {
    "6181": "1.160.50.1", "1002754": "1.160.60.1", "13218": "8.60.50.1", "5001": "9.70.50.1",
    "5002": "4.20.50.1", "5003": "17.0.50.1", "5004": "20.0.50.1", "7113": "20.0.60.1",
    "6493": "19.0.60.1", "5005": "19.0.50.1", "5006": "192.168.1.20", "5007": "3.10.50.1",
    "7030": "21.0.60.1", "5008": "24.0.50.1",
}

HOSTNAMES = {
    "6.40.0.9": "ae1.lon.example.net",
    "18.0.0.2": "xe-0-0-1.tyo.jp.example.net",
    "2.100.0.2": "be10.hkg.example.net",
}
HINT_RULES = [(r"\.lon\.", "GB"), (r"\.tyo\.", "JP"), (r"\.hkg\.", "HK"), (r"\.jp\.", "JP")]

S = "*"


def case(name, probe, fqdn, dst, hops, expect, proto="ICMP"):
    return {"name": name, "probe": probe, "fqdn": fqdn, "dst": dst, "hops": hops, "proto": proto, "expect": expect}


def analyzed(cls, dest, citms, removed, reach, run, hints=None, anycast=None):
    e = {"status": "analyzed", "classification": cls, "dest_country": dest, "citms": citms,
         "removed": removed, "reach": reach, "longest_unlabeled_run": run}
    if hints:
        e["hints"] = hints
    if anycast:
        e["anycast"] = anycast
    return e


CASES = [
    # Hong Kong on hop 2 for the PCCW probe, back to Taiwan on hop 3.
    case("tw-hk-citm", "6181", "www.gov.tw", "1.160.9.10",
         [[("1.160.0.1", 1.11)], [("2.100.0.2", 47.25)], [("1.160.1.1", 106.99)], [("1.160.9.10", 108.0)]],
         analyzed("Convergent", "TW", ["HK"], [], "ReachedIP", 0, hints={"HK": ["agree"]})),
    case("tw-domestic", "1002754", "www.gov.tw", "1.160.9.10",
         [[("1.160.0.5", 0.5)], [("1.160.1.5", 0.77)], [("1.160.2.5", 1.62)], [("1.160.9.10", 2.1)]],
         analyzed("Convergent", "TW", [], [], "ReachedIP", 0)),
    case("tw-unlabeled-run", "1002754", "moi.gov.tw", "1.160.9.11",
         [[("1.160.0.5", 0.5)], [S], [S], [("1.160.2.5", 3.0)], [("1.160.9.11", 3.5)]],
         analyzed("Convergent", "TW", [], [], "ReachedIP", 2)),
    # Kenya to a Kenyan site through London and Johannesburg.
    case("ke-gb-za", "13218", "www.go.ke", "8.60.9.10",
         [[("8.60.0.1", 0.54)], [("6.40.0.9", 194.51)], [("7.50.0.1", 200.0)], [("8.60.9.10", 210.0)]],
         analyzed("Convergent", "KE", ["GB", "ZA"], [], "ReachedIP", 0, hints={"GB": ["agree"], "ZA": ["unknown"]})),
    case("ke-divergent-gb", "13218", "e.go.ke", "6.40.9.10",
         [[("8.60.0.1", 0.6)], [("23.0.0.1", 180.0)], [("6.40.0.1", 190.0)], [("6.40.9.10", 191.0)]],
         analyzed("Divergent", "GB", ["FR"], [], "ReachedIP", 0)),
    # Anycast target; the Thai hop lies outside every candidate country.
    case("ae-anycast-th", "5001", "u.ae", ANYCAST_IP,
         [[("9.70.0.1", 1.0)], [("12.80.0.1", 75.0)], [(ANYCAST_IP, 80.0)]],
         analyzed("Anycast", None, ["TH"], [], "ReachedIP", 0, anycast=ANYCAST_SET)),
    case("ae-anycast-jp", "5001", "u.ae", ANYCAST_IP,
         [[("9.70.0.1", 1.0)], [("4.20.0.7", 130.0)], [(ANYCAST_IP, 131.0)]],
         analyzed("Anycast", None, [], [], "ReachedIP", 0, anycast=ANYCAST_SET)),
    case("ae-anycast-sg", "5001", "moi.gov.ae", ANYCAST_IP,
         [[("9.70.0.1", 1.0)], [S], [("3.10.0.5", 90.0)], [(ANYCAST_IP, 95.0)]],
         analyzed("Anycast", None, ["SG"], [], "ReachedIP", 1, anycast=ANYCAST_SET)),
    # 2 ms from Tokyo cannot reach Prague: the CZ hop is a geolocation error.
    # Its reply is removed, so hop 2 counts as unlabeled afterwards.
    case("jp-cz-removed", "5002", "www.go.jp", "4.20.9.10",
         [[("4.20.0.1", 0.4)], [("18.0.0.2", 2.0)], [("4.20.0.3", 2.5)], [("4.20.9.10", 3.0)]],
         analyzed("Convergent", "JP", [], ["CZ"], "ReachedIP", 1, hints={"CZ": ["disagree"]})),
    case("jp-cz-mixed", "5002", "cao.go.jp", "4.20.9.11",
         [[("4.20.0.1", 0.4)], [("18.0.0.2", 2.0)], [("18.0.0.3", 250.0)], [("4.20.9.11", 260.0)]],
         analyzed("Convergent", "JP", ["CZ"], [], "ReachedIP", 0, hints={"CZ": ["disagree", "unknown"]})),
    case("by-domestic", "5003", "www.gov.by", "17.0.9.10",
         [[("17.0.0.1", 0.3)], [("17.0.0.2", 0.9)], [("17.0.9.10", 1.5)]],
         analyzed("Convergent", "BY", [], [], "ReachedIP", 0)),
    case("by-private-hops", "5003", "mvd.gov.by", "17.0.9.11",
         [[("192.168.1.1", 0.3)], [("10.0.0.1", 0.5)], [("17.0.0.2", 0.9)], [("17.0.9.11", 1.5)]],
         analyzed("Convergent", "BY", [], [], "ReachedIP", 2)),
    # 11.0.0.0/8 would geolocate to the U.S.; it is squatted and stripped.
    case("br-squat", "5004", "www.gov.br", "20.0.9.10",
         [[("20.0.0.1", 0.5)], [("11.4.5.6", 1.0)], [("20.0.0.3", 2.0)], [("20.0.9.10", 2.5)]],
         analyzed("Convergent", "BR", [], [], "ReachedIP", 1)),
    case("br-empty-probe", "7113", "www.gov.br", "20.0.9.10",
         [[S], [S], [S]],
         {"status": "dropped", "kind": "drop_path_probe"}),
    case("ca-violator-probe", "6493", "canada.ca", "19.0.9.10",
         [[("19.0.0.1", 0.5)], [("19.0.9.10", 10.0)]],
         {"status": "dropped", "kind": "drop_path_probe"}),
    # Vancouver to eastern Canada through Seattle.
    case("ca-us-boomerang", "5005", "canada.ca", "19.0.9.10",
         [[("19.0.0.1", 0.5)], [("5.30.0.1", 5.0)], [("5.30.0.2", 40.0)], [("19.0.0.9", 60.0)], [("19.0.9.10", 61.0)]],
         analyzed("Convergent", "CA", ["US"], [], "ReachedIP", 0)),
    # Stops inside Amazon: the destination AS is reached, the IP is not.
    case("us-reached-as", "5006", "www.usa.gov", "5.31.200.10",
         [[("192.168.1.1", 0.3)], [("5.30.0.1", 2.0)], [("5.31.9.9", 3.0)], [S], [S]],
         analyzed("Convergent", "US", [], [], "ReachedAS", 2)),
    case("us-not-reached", "5006", "www.irs.gov", "5.31.200.20",
         [[("5.30.0.1", 2.0)], [("5.32.0.1", 30.0)], [S], [S], [S]],
         analyzed("Convergent", "US", [], [], "NotReached", 3)),
    # Destination not in the geolocation table: only the source is excluded.
    case("sg-unknown-dest", "5007", "www.gov.sg", "26.1.1.1",
         [[("3.10.0.1", 0.5)], [("2.100.0.7", 40.0)], [("26.1.1.1", 45.0)]],
         analyzed("Divergent", None, ["HK"], [], "ReachedIP", 0)),
    case("by-rejected-site", "5003", "dha.by", "17.0.9.12",
         [[("17.0.0.1", 0.3)], [("17.0.9.12", 1.0)]],
         {"status": "dropped", "kind": "drop_path_target"}),
    # Claims China, self-reported coordinates are in Hong Kong.
    case("cn-probe-in-hk", "7030", "www.gov.cn", "21.0.9.10",
         [[("21.0.0.1", 1.0)], [("21.0.9.10", 20.0)]],
         {"status": "dropped", "kind": "drop_path_probe"}),
    # Two routers answer at one TTL; both are evidence.
    case("tw-multi-reply", "6181", "www.gov.tw", "1.160.9.10",
         [[("1.160.0.1", 1.1)], [("2.100.0.3", 50.0), ("3.10.0.3", 60.0), ("2.100.0.3", 52.0)],
          [("1.160.1.1", 90.0)], [("1.160.9.10", 95.0)]],
         analyzed("Convergent", "TW", ["HK", "SG"], [], "ReachedIP", 0)),
    # Destination address answers mid-path; it is never a CitM candidate.
    case("tw-dst-loop", "6181", "www.gov.tw", "1.160.9.10",
         [[("1.160.0.1", 1.1)], [("1.160.9.10", 3.0)], [("5.30.0.7", 150.0)], [("1.160.9.10", 300.0)]],
         analyzed("Convergent", "TW", ["US"], [], "ReachedIP", 0)),
    # Late reply without an RTT cannot refute the geolocation.
    case("tw-no-rtt", "6181", "www.gov.tw", "1.160.9.10",
         [[("1.160.0.1", 1.1)], [("5.30.0.8", None)], [("1.160.9.10", 200.0)]],
         analyzed("Convergent", "TW", ["US"], [], "ReachedIP", 0)),
    # Manila: Singapore is plausible at 40 ms, Hong Kong at 3 ms is not.
    case("ph-sg-hk", "5008", "www.gov.ph", "24.0.9.10",
         [[("24.0.0.1", 0.5)], [("2.100.0.9", 3.0)], [("3.10.0.9", 40.0)], [("24.0.9.10", 45.0)]],
         analyzed("Convergent", "PH", ["SG"], ["HK"], "ReachedIP", 1)),
]

BGP_DAYS = ["2024-02-0%d" % d for d in range(1, 8)]
BGP_ROUTES = [
    # stable for all seven days: the incomplete U.S. path maps onto it
    ("5.31.200.0/24", [7018, 3356, 1299, 2914, 16509], BGP_DAYS),
    # seen only four days: discarded as spurious
    ("5.31.200.0/24", [7018, 3356, 1299, 6453, 16509], BGP_DAYS[:4]),
]


def hop_records(hops):
    out = []
    for i, hop in enumerate(hops, 1):
        replies = []
        for r in hop:
            if r == S:
                replies.append({"x": "*"})
            else:
                d = {"from": r[0], "size": 76, "ttl": 250}
                if r[1] is not None:
                    d["rtt"] = r[1]
                else:
                    d["late"] = 1
                replies.append(d)
        out.append({"hop": i, "result": replies})
    return out


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "geo.csv"), "w") as fh:
        fh.write("prefix,country,lat,lon\n")
        for c, (pfx, _, (lat, lon)) in COUNTRIES.items():
            fh.write(f"{pfx},{c},{lat},{lon}\n")
        for pfx, c, (lat, lon) in EXTRA_GEO:
            fh.write(f"{pfx},{c},{lat},{lon}\n")
    with open(os.path.join(OUT, "pfx2as.tsv"), "w") as fh:
        for _, (pfx, asn, _) in COUNTRIES.items():
            fh.write(f"{pfx}\t{asn}\n")
        for pfx, asn in EXTRA_AS:
            fh.write(f"{pfx}\t{asn}\n")
    with open(os.path.join(OUT, "anycast.csv"), "w") as fh:
        fh.write("ip,countries\n")
        fh.write(f"{ANYCAST_IP},{'|'.join(ANYCAST_SET)}\n")
    with open(os.path.join(OUT, "probes.jsonl"), "w") as fh:
        for p in PROBES:
            fh.write(json.dumps(p) + "\n")
    with open(os.path.join(OUT, "hostnames.csv"), "w") as fh:
        fh.write("ip,hostname\n")
        for ip, name in HOSTNAMES.items():
            fh.write(f"{ip},{name}\n")
    with open(os.path.join(OUT, "hints.txt"), "w") as fh:
        fh.write("# regex<TAB>country, first match wins\n")
        for pat, c in HINT_RULES:
            fh.write(f"{pat}\t{c}\n")
    with open(os.path.join(OUT, "excluded_probes.txt"), "w") as fh:
        fh.write("# published list of misplaced probes\n6493\n# empty responses for every traceroute\n7113\n")
    with open(os.path.join(OUT, "verdicts.csv"), "w") as fh:
        fh.write("candidate_id,fqdn,country,verdict\nBY:dha.by,dha.by,BY,rejected\nBY:www.gov.by,www.gov.by,BY,government\n")
    with open(os.path.join(OUT, "probe_boxes.csv"), "w") as fh:
        fh.write("country,min_lat,min_lon,max_lat,max_lon\nCN,18.0,73.0,54.0,135.0\nTW,21.8,119.9,25.4,122.1\nHK,22.15,113.8,22.6,114.5\n")
    with open(os.path.join(OUT, "bgp.tsv"), "w") as fh:
        for pfx, path, days in BGP_ROUTES:
            for d in days:
                fh.write(f"{d}\t{pfx}\t{' '.join(map(str, path))}\n")

    expected = {}
    with open(os.path.join(OUT, "traceroutes.jsonl"), "w") as fh:
        for i, c in enumerate(CASES):
            rec = {
                "af": 4,
                "msm_id": 68064900 + i,
                "prb_id": int(c["probe"]),
                "src_addr": SRC_IP[c["probe"]],
                "dst_addr": c["dst"],
                "dst_name": c["fqdn"],
                "proto": c["proto"],
                "timestamp": 1707000000 + 60 * i,
                "type": "traceroute",
                "paris_id": 1,
                "result": hop_records(c["hops"]),
            }
            fh.write(json.dumps(rec) + "\n")
            expected[f"{rec['msm_id']}:{c['probe']}:{rec['timestamp']}"] = {"name": c["name"], **c["expect"]}
    expected_bgp = {"68064916:5006:1707000960": [], "68064917:5006:1707001020": [2914]}
    with open(os.path.join(OUT, "expected.json"), "w") as fh:
        json.dump({"paths": expected, "bgp": expected_bgp}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(CASES)} cases to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
