import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from citm.ingest import (
    UnsupportedFamily,
    RecordError,
    parse_probe_record,
    parse_probes,
    parse_traceroute_record,
    parse_traceroutes,
    serialize_path,
    serialize_probe,
)

from conftest import corpus_file


def rec(**kw):
    base = {
        "msm_id": 1,
        "prb_id": 6181,
        "src_addr": "1.160.50.1",
        "dst_addr": "8.8.8.8",
        "dst_name": "www.gov.tw",
        "proto": "ICMP",
        "timestamp": 100,
        "result": [
            {"hop": 1, "result": [{"from": "10.0.0.1", "rtt": 1.2}]},
            {"hop": 2, "result": [{"x": "*"}]},
            {"hop": 3, "result": [{"from": "8.8.8.8", "rtt": 9.0}]},
        ],
    }
    base.update(kw)
    return base


def test_three_hops_second_unlabeled():
    path = parse_traceroute_record(rec(), {"6181": "TW"})
    assert [h.index for h in path.hops] == [1, 2, 3]
    assert [h.labeled for h in path.hops] == [True, False, True]
    assert path.hops[0].replies[0].rtt_ms == 1.2
    assert path.src_country == "TW"
    assert path.path_id == "1:6181:100"


def test_missing_dst_addr_names_field_and_line():
    good = json.dumps(rec())
    bad = rec()
    del bad["dst_addr"]
    res = parse_traceroutes([good, json.dumps(bad)], {"6181": "TW"})
    assert len(res.items) == 1
    (err,) = res.errors
    assert err.line == 2 and err.field == "dst_addr"
    assert "dst_addr" in str(err) and "line 2" in str(err)


def test_three_valid_one_malformed():
    lines = [json.dumps(rec(msm_id=i)) for i in range(3)]
    lines.insert(2, "{not json")
    res = parse_traceroutes(io.StringIO("\n".join(lines) + "\n"), {"6181": "TW"})
    assert len(res.items) == 3
    assert [e.line for e in res.errors] == [3]
    assert res.n_records == 4


def test_ipv6_rejected_as_unsupported_family():
    with pytest.raises(UnsupportedFamily):
        parse_traceroute_record(rec(af=6), {"6181": "TW"})
    with pytest.raises(UnsupportedFamily):
        parse_traceroute_record(rec(dst_addr="2001:db8::1"), {"6181": "TW"})


def test_unknown_source_country_is_an_error():
    with pytest.raises(RecordError) as exc:
        parse_traceroute_record(rec(), {})
    assert exc.value.field == "src_country"


def test_record_country_overrides_nothing_missing():
    path = parse_traceroute_record(rec(src_country="tw"))
    assert path.src_country == "TW"


@pytest.mark.parametrize(
    "result",
    [
        [{"hop": 2, "result": []}, {"hop": 1, "result": []}],
        [{"hop": 1, "result": []}, {"hop": 1, "result": []}],
        [],
        [{"result": []}],
    ],
)
def test_bad_hop_lists(result):
    with pytest.raises(RecordError):
        parse_traceroute_record(rec(result=result), {"6181": "TW"})


def test_negative_rtt_rejected():
    r = rec(result=[{"hop": 1, "result": [{"from": "1.1.1.1", "rtt": -1}]}])
    with pytest.raises(RecordError):
        parse_traceroute_record(r, {"6181": "TW"})


def test_empty_hop_result_becomes_unlabeled():
    r = rec(result=[{"hop": 1}, {"hop": 2, "result": [{"from": "1.1.1.1", "rtt": 3}]}])
    path = parse_traceroute_record(r, {"6181": "TW"})
    assert not path.hops[0].labeled and path.hops[1].labeled


def test_protocol_normalized():
    assert parse_traceroute_record(rec(proto="tcp"), {"6181": "TW"}).protocol == "TCP"
    with pytest.raises(RecordError):
        parse_traceroute_record(rec(proto="SCTP"), {"6181": "TW"})


def test_probe_6181_valid():
    p = parse_probe_record({"id": "6181", "country": "TW", "lat": 25.03, "lon": 121.56, "asn": 3491})
    assert (p.probe_id, p.country, p.lat, p.lon, p.asn) == ("6181", "TW", 25.03, 121.56, 3491)


def test_latitude_95_rejected():
    res = parse_probes([json.dumps({"id": "1", "country": "TW", "lat": 95, "lon": 0})])
    assert not res.items
    assert res.errors[0].field == "lat" and "range" in res.errors[0].message


def test_duplicate_probe_lists_both_lines():
    lines = [
        json.dumps({"id": "7113", "country": "BR", "lat": -22.9, "lon": -43.2}),
        json.dumps({"id": "42", "country": "BR", "lat": -22.9, "lon": -43.2}),
        json.dumps({"id": "7113", "country": "BR", "lat": -23.0, "lon": -43.0}),
    ]
    res = parse_probes(lines)
    assert [p.probe_id for p in res.items] == ["7113", "42"]
    assert res.items[0].lat == -22.9
    (err,) = res.errors
    assert "7113" in err.message and "lines 1 and 3" in err.message


def test_probe_flags():
    p = parse_probe_record({"id": 1, "country": "cn", "lat": 0, "lon": 0, "is_anchor": True,
                            "flags": ["flagged_misgeolocated"]})
    assert p.flags == {"anchor", "flagged_misgeolocated"} and p.country == "CN"
    with pytest.raises(RecordError):
        parse_probe_record({"id": 1, "country": "CN", "lat": 0, "lon": 0, "flags": ["bogus"]})


# round trip and totality over generated records

ips = st.tuples(*[st.integers(1, 223)] + [st.integers(0, 255)] * 3).map(lambda t: ".".join(map(str, t)))
replies = st.one_of(
    st.just({"x": "*"}),
    st.builds(lambda ip, rtt: {"from": ip, "rtt": rtt}, ips, st.floats(0, 1000, allow_nan=False)),
    st.builds(lambda ip: {"from": ip}, ips),
)
hop_lists = st.lists(st.lists(replies, min_size=1, max_size=3), min_size=1, max_size=12)


@st.composite
def records(draw):
    hops = draw(hop_lists)
    gaps = draw(st.lists(st.integers(1, 3), min_size=len(hops), max_size=len(hops)))
    idx, result = 0, []
    for g, h in zip(gaps, hops):
        idx += g
        result.append({"hop": idx, "result": h})
    return {
        "msm_id": str(draw(st.integers(1, 10**8))),
        "prb_id": str(draw(st.integers(1, 10**7))),
        "src_addr": draw(ips),
        "src_country": draw(st.sampled_from(["TW", "KE", "BY", "US"])),
        "dst_addr": draw(ips),
        "dst_name": draw(st.sampled_from(["www.gov.tw", "canada.ca", "a.b.gov.by"])),
        "proto": draw(st.sampled_from(["ICMP", "UDP", "TCP"])),
        "timestamp": draw(st.integers(0, 2**31)),
        "result": result,
    }


@given(records())
def test_round_trip(r):
    path = parse_traceroute_record(r)
    assert serialize_path(path) == r
    assert parse_traceroute_record(serialize_path(path)) == path


@given(records())
def test_hop_indices_strictly_increasing(r):
    idx = [h.index for h in parse_traceroute_record(r).hops]
    assert all(a < b for a, b in zip(idx, idx[1:]))


@given(st.lists(st.one_of(records().map(json.dumps), st.text(max_size=30).filter(lambda s: s.strip()))))
def test_parse_is_total(lines):
    lines = [ln.replace("\n", " ").replace("\r", " ") for ln in lines]
    lines = [ln for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    res = parse_traceroutes(lines)
    assert res.n_records == len(lines)


def test_corpus_fixture_parses_completely():
    with open(corpus_file("probes.jsonl")) as fh:
        probes = parse_probes(fh)
    assert not probes.errors
    countries = {p.probe_id: p.country for p in probes.items}
    with open(corpus_file("traceroutes.jsonl")) as fh:
        res = parse_traceroutes(fh, countries)
    assert len(res.items) == 25 and not res.errors
    for p in probes.items:
        assert parse_probe_record(serialize_probe(p)) == p
