import ipaddress

from hypothesis import given
from hypothesis import strategies as st

from citm.geodata import GeoIndex
from citm.ingest import ProbeRecord
from citm.sanitize import (
    BoxLocator,
    SanitizeConfig,
    default_bogons,
    default_squats,
    filter_probes,
    read_cidr_list,
    read_id_list,
    sanitize_path,
)

from conftest import corpus_file, make_path

GEO = GeoIndex.from_csv(corpus_file("geo.csv"))


def kinds(actions):
    return [a.kind for a in actions]


def test_excluded_probe_dropped():
    cfg = SanitizeConfig(excluded_probe_ids={"6493"})
    path = make_path([[("19.0.0.1", 0.5)]], src_country="CA", probe_id="6493")
    out, actions = sanitize_path(path, cfg)
    assert out is None
    assert kinds(actions) == ["drop_path_probe"]
    assert actions[0].subject == "probe 6493"


def test_excluded_target_dropped():
    cfg = SanitizeConfig(excluded_fqdns={"dha.by"}, exclusion_reasons={"dha.by": "review verdict: rejected"})
    out, actions = sanitize_path(make_path([[("17.0.0.1", 1)]], fqdn="dha.by"), cfg)
    assert out is None and kinds(actions) == ["drop_path_target"]
    assert actions[0].reason == "review verdict: rejected"


def test_squat_reply_stripped():
    path = make_path([[("1.160.0.1", 1)], [("11.1.2.3", 2)], [("1.160.9.10", 3)]])
    out, actions = sanitize_path(path, SanitizeConfig())
    assert kinds(actions) == ["strip_squat"]
    assert not out.hops[1].labeled
    assert any("11.1.2.3" in n for n in out.log)


def test_private_reply_stripped():
    path = make_path([[("192.168.1.1", 1)], [("1.160.9.10", 3)]])
    out, actions = sanitize_path(path, SanitizeConfig())
    assert kinds(actions) == ["strip_private"]
    assert not out.hops[0].labeled and out.hops[1].labeled
    assert [h.index for h in out.hops] == [1, 2]


def test_mixed_hop_keeps_public_reply():
    path = make_path([[("10.0.0.1", 1), ("1.160.0.1", 2), ("10.0.0.1", 1.5)]])
    out, actions = sanitize_path(path, SanitizeConfig())
    assert len(actions) == 1
    assert out.hops[0].ips() == ["1.160.0.1"]


def test_clean_path_untouched():
    path = make_path([[("1.160.0.1", 1)], [None], [("1.160.9.10", 3)]])
    out, actions = sanitize_path(path, SanitizeConfig())
    assert out is path and actions == []


def test_defaults_cover_rfc1918_and_squat():
    bogons = default_bogons()
    for ip in ("10.1.1.1", "172.16.0.1", "192.168.1.1", "100.64.0.1", "127.0.0.1", "169.254.1.1"):
        assert any(ipaddress.ip_address(ip) in n for n in bogons), ip
    assert default_squats() == [ipaddress.ip_network("11.0.0.0/8")]


def test_list_readers():
    assert read_cidr_list(["# x", "", "10.0.0.0/8  # private", "11.0.0.0/8"]) == [
        ipaddress.ip_network("10.0.0.0/8"),
        ipaddress.ip_network("11.0.0.0/8"),
    ]
    assert read_id_list(["6493", "# c", " 7113 ", "DHA.BY"]) == {"6493", "7113", "dha.by"}


def test_legacy_filter_off_by_default():
    path = make_path([[("1.160.0.1", 1)], [("2.100.0.2", 47.25)], [("1.160.9.10", 50)]])
    out, actions = sanitize_path(path, SanitizeConfig(), GEO)
    assert actions == [] and out.hops[1].labeled


def test_legacy_filter_strips_single_country():
    path = make_path([[("1.160.0.1", 1)], [("2.100.0.2", 47.25)], [("1.160.0.2", 49)], [("1.160.9.10", 50)]])
    out, actions = sanitize_path(path, SanitizeConfig(legacy_single_occurrence_filter=True), GEO)
    assert kinds(actions) == ["strip_legacy_single"]
    assert not out.hops[1].labeled


def probe(pid, country, lat, lon, flags=()):
    return ProbeRecord(pid, country, lat, lon, flags=frozenset(flags))


def test_filter_probes():
    boxes = BoxLocator.from_csv(corpus_file("probe_boxes.csv"))
    probes = [
        probe("6493", "CA", 43.65, -79.38),
        probe("7030", "CN", 22.30, 114.20),
        probe("5", "CN", 39.9, 116.4),
        probe("6", "TW", 25.03, 121.56),
        probe("7", "JP", 35.0, 139.0, flags=["flagged_misgeolocated"]),
    ]
    kept, dropped = filter_probes(probes, SanitizeConfig(excluded_probe_ids={"6493"}), boxes)
    assert [p.probe_id for p in kept] == ["5", "6"]
    reasons = {d.probe.probe_id: d.reason for d in dropped}
    assert reasons["7030"] == "self-reported location mismatch (CN vs HK)"
    assert reasons["6493"] == "probe excluded"
    assert "misgeolocated" in reasons["7"]


def test_box_outside_any_region_is_trusted():
    kept, _ = filter_probes([probe("1", "AR", -34.6, -58.4)], SanitizeConfig(), BoxLocator([]))
    assert len(kept) == 1


# property tests over generated paths

SPECIAL = ["10.0.0.1", "10.9.9.9", "192.168.1.1", "172.16.5.4", "100.64.1.1", "11.1.2.3", "11.200.0.1",
           "127.0.0.1", "169.254.3.3", "224.0.0.5"]
PUBLIC = ["1.160.0.1", "2.100.0.2", "3.10.0.1", "4.20.0.1", "5.30.0.1", "12.80.0.1", "1.160.9.10"]
reply = st.one_of(st.none(), st.tuples(st.sampled_from(SPECIAL + PUBLIC), st.floats(0, 300)))
paths = st.lists(st.lists(reply, min_size=1, max_size=3), min_size=1, max_size=10).map(make_path)


def in_any(ip, nets):
    a = ipaddress.ip_address(ip)
    return any(a in n for n in nets)


@given(paths)
def test_no_bogon_or_squat_survives(path):
    cfg = SanitizeConfig()
    out, _ = sanitize_path(path, cfg)
    nets = default_bogons() + default_squats()
    assert not any(in_any(ip, nets) for ip in out.reply_ips())


@given(paths)
def test_action_count_matches_structural_diff(path):
    out, actions = sanitize_path(path, SanitizeConfig())
    diff = sum(len(set(a.ips()) - set(b.ips())) for a, b in zip(path.hops, out.hops))
    assert len(actions) == diff
    assert len(out.hops) == len(path.hops)


@given(paths)
def test_idempotent(path):
    cfg = SanitizeConfig()
    once, _ = sanitize_path(path, cfg)
    twice, again = sanitize_path(once, cfg)
    assert again == []
    assert twice.hops == once.hops
