import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from citm.curate import (
    CurateError,
    OfflineCertProvider,
    OfflinePortProber,
    OfflineResolver,
    SeedDomain,
    SuffixTable,
    TargetCandidate,
    check_liveness,
    expand_candidates,
    extract_etld1,
    import_verdicts,
    load_seeds,
    probe_sort_key,
    sample_official_first,
    sample_targets,
    select_probes,
    write_review_queue,
)
from citm.geodata import Pfx2AsIndex
from citm.ingest import ProbeRecord

import oracles
from conftest import FIXTURES

CUR = FIXTURES + "/curate/"
PSL = SuffixTable.from_file(CUR + "suffixes.dat")


def test_etld1_examples():
    assert extract_etld1("https://www.canada.ca/en.html", PSL) == "canada.ca"
    assert extract_etld1("a.b.gc.ca", SuffixTable(["ca"])) == "gc.ca"
    with pytest.raises(CurateError):
        extract_etld1("https://203.0.113.5/", PSL)


def test_etld1_multi_label_and_wildcards():
    assert extract_etld1("https://www.gov.uk/x", PSL) == "gov.uk"
    assert extract_etld1("https://a.nhs.co.uk", PSL) == "nhs.co.uk"
    assert extract_etld1("https://a.b.foo.ck", PSL) == "b.foo.ck"
    assert extract_etld1("https://www.ck", PSL) == "www.ck"
    assert extract_etld1("http://Portal.GOV.BY:8443/", PSL) == "gov.by"
    with pytest.raises(CurateError):
        extract_etld1("https://co.uk/", PSL)


def test_load_seeds_reports_bad_rows():
    seeds, errors = load_seeds(CUR + "seeds.csv", PSL)
    assert [s.etld1 for s in seeds] == ["canada.ca", "gc.ca", "gov.by", "gov.by", "mvd.by"]
    assert len(errors) == 1 and "IP literal" in errors[0]


class DictProvider:
    def __init__(self, answers, fail=()):
        self.answers, self.fail, self.calls = answers, set(fail), []

    def names_under(self, domain):
        self.calls.append(domain)
        if domain in self.fail:
            raise ConnectionError("service unavailable")
        return self.answers.get(domain, [])


def seed(url, etld1, country, source="wikipedia"):
    return SeedDomain(url, etld1, country, source)


def test_expand_subdomain_filter():
    res = expand_candidates([seed("https://gov.by", "gov.by", "BY")],
                            DictProvider({"gov.by": ["mail.gov.by", "x.example.com"]}))
    assert [c.fqdn for c in res.candidates] == ["gov.by", "mail.gov.by"]
    assert [c.source for c in res.candidates] == ["wikipedia", "certificate"]


def test_expand_dedup_first_country_kept():
    prov = DictProvider({"gov.by": ["mail.gov.by"], "gov.by2": []})
    res = expand_candidates([seed("https://gov.by", "gov.by", "BY"), seed("https://mail.gov.by", "gov.by", "RU")], prov)
    assert {c.fqdn: c.country for c in res.candidates} == {"gov.by": "BY", "mail.gov.by": "BY"}
    assert any("conflict" in line for line in res.log)
    assert prov.calls == ["gov.by"]


def test_expand_provider_failure_isolated():
    prov = DictProvider({"b.ca": ["x.b.ca"]}, fail={"a.ca"})
    res = expand_candidates([seed("https://a.ca", "a.ca", "CA"), seed("https://b.ca", "b.ca", "CA")], prov)
    assert [c.fqdn for c in res.candidates] == ["a.ca", "b.ca", "x.b.ca"]
    assert res.log == ["provider failed for a.ca: service unavailable"]


def test_expand_offline_replay_deterministic():
    seeds, _ = load_seeds(CUR + "seeds.csv", PSL)
    a = expand_candidates(seeds, OfflineCertProvider(CUR + "certs"))
    b = expand_candidates(list(seeds), OfflineCertProvider(CUR + "certs"))
    assert a == b
    assert "canada.ca" in [c.fqdn for c in a.candidates]  # from the *.canada.ca wildcard
    assert "x.example.com" not in [c.fqdn for c in a.candidates]
    assert a.log == ["provider failed for mvd.by: no certificate answers for mvd.by"]


@pytest.fixture(scope="module")
def live():
    return OfflineResolver(CUR + "dns.tsv"), OfflinePortProber(CUR + "ports.tsv"), Pfx2AsIndex.from_tsv(CUR + "pfx2as.tsv")


def test_liveness(live):
    resolver, prober, pfx2as = live
    c = check_liveness(TargetCandidate("www.gc.ca", "gc.ca", "CA"), resolver, prober, pfx2as)
    assert c.port443_open and c.resolved_ips == ("19.0.2.20", "19.1.0.6")
    assert (c.asn, c.prefix) == (577, "19.0.2.0/24")
    nx = check_liveness(TargetCandidate("travel.gc.ca", "gc.ca", "CA"), resolver, prober, pfx2as)
    assert not nx.port443_open and nx.resolved_ips == ()
    closed = check_liveness(TargetCandidate("canada.ca", "canada.ca", "CA"), resolver, prober, pfx2as)
    assert not closed.port443_open and closed.resolved_ips == ("19.0.1.11",)
    slow = check_liveness(TargetCandidate("www.mvd.by", "mvd.by", "BY"), resolver, prober, pfx2as)
    assert not slow.port443_open and slow.resolved_ips == ("17.0.1.9",)


def cand(fqdn, asn, prefix, ip, open_=True, verdict="government", source="certificate", country="CA"):
    return TargetCandidate(fqdn, "x.ca", country, source, (ip,), asn, prefix, open_, verdict)


def test_sampling_prefers_new_as_then_prefix_then_ip():
    cs = [
        cand("a.x.ca", 1, "p1", "i1"),
        cand("b.x.ca", 1, "p1", "i1"),
        cand("c.x.ca", 1, "p2", "i3"),
        cand("d.x.ca", 2, "p4", "i4"),
        cand("e.x.ca", 1, "p1", "i2"),
        cand("f.x.ca", 3, "p5", "i5", open_=False),
        cand("g.x.ca", 4, "p6", "i6", verdict="pending"),
    ]
    picked = [c.fqdn for c in sample_targets(cs, cap=10)]
    assert picked == ["a.x.ca", "d.x.ca", "c.x.ca", "e.x.ca", "b.x.ca"]
    assert [c.fqdn for c in sample_targets(cs, cap=2)] == ["a.x.ca", "d.x.ca"]


@st.composite
def hierarchical_pools(draw):
    # each IP lives in one prefix and each prefix in one AS, as LPM guarantees
    n_as = draw(st.integers(1, 4))
    prefixes = [(f"p{i}", draw(st.integers(0, n_as - 1))) for i in range(draw(st.integers(1, 6)))]
    ips = [(f"i{i}", draw(st.integers(0, len(prefixes) - 1))) for i in range(draw(st.integers(1, 8)))]
    n = draw(st.integers(1, 12))
    out = []
    for k in range(n):
        ip, pi = ips[draw(st.integers(0, len(ips) - 1))]
        pfx, ai = prefixes[pi]
        out.append(cand(f"h{k:02d}.x.ca", 64500 + ai, pfx, ip))
    return out, draw(st.integers(1, n))


@given(hierarchical_pools())
def test_sampling_reaches_exhaustive_optimum(pool_k):
    pool, k = pool_k
    got = oracles.diversity_objective(sample_targets(pool, cap=k))
    assert got == oracles.best_objective(pool, k)


def test_official_first_sampling():
    cs = [cand(f"c{i}.x.ca", i, f"p{i}", f"i{i}") for i in range(6)] + [
        cand("z.x.ca", 9, "p9", "i9", source="wikipedia"),
        cand("y.x.ca", 9, "p9", "i9", source="un-egov"),
    ]
    a = sample_official_first(cs, cap=4, seed=1)
    assert [c.fqdn for c in a[:2]] == ["y.x.ca", "z.x.ca"]
    assert a == sample_official_first(list(reversed(cs)), cap=4, seed=1)


def test_probe_sort_is_numeric_aware():
    assert sorted(["300", "31", "1000", "7", "abc"], key=probe_sort_key) == ["7", "31", "300", "1000", "abc"]


def test_select_probes():
    probes = [ProbeRecord(str(i), "TW", 25.0, 121.5, asn) for asn, ids in
              {3462: [3, 7, 20, 101, 1000], 3491: [6181, 12, 55, 9], 4780: [300, 31, 5000], 9924: [42]}.items()
              for i in ids]
    probes.append(ProbeRecord("1", "KE", -1.3, 36.8, None))
    sel = select_probes(probes, cap=10)
    assert sel["TW"].probe_ids == ("3", "9", "31", "42", "7", "12", "300", "20", "55", "5000")
    assert sel["TW"].rationale[0] == "AS3462 first of AS"
    assert sel["KE"].probe_ids == ("1",) and sel["KE"].rationale == ("unknown AS first of AS",)
    few = select_probes(probes[:3], cap=10)
    assert few["TW"].probe_ids == ("3", "7", "20")


def test_review_queue_round_trip():
    cs = [cand("b.x.ca", 1, "p", "i", verdict="pending"), cand("a.x.ca", 1, "p", "i", verdict="pending"),
          cand("c.x.ca", 1, "p", "i")]
    buf = io.StringIO()
    assert write_review_queue(cs, buf) == 2
    lines = buf.getvalue().splitlines()
    assert lines == ["candidate_id,fqdn,country,verdict", "CA:a.x.ca,a.x.ca,CA,pending", "CA:b.x.ca,b.x.ca,CA,pending"]
    filled = "\n".join([lines[0], "CA:a.x.ca,a.x.ca,CA,government", "CA:b.x.ca,b.x.ca,CA,maybe",
                        "CA:zz.x.ca,zz.x.ca,CA,rejected"]) + "\n"
    out, errors = import_verdicts(cs, io.StringIO(filled))
    assert [c.review_verdict for c in out] == ["pending", "government", "government"]
    assert len(errors) == 2
