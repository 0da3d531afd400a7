import os

import hypothesis
import pytest

from citm.analysis import Datasets
from citm.geodata import AnycastIndex, CountryPoints, GeoIndex, HintRules, Pfx2AsIndex, load_hostnames
from citm.ingest import UNLABELED, Hop, HopReply, TraceroutePath, load_probes

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=50, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

HERE = os.path.dirname(__file__)
FIXTURES = os.path.join(HERE, "fixtures")
CORPUS = os.path.join(FIXTURES, "corpus")


def make_path(hops, src_country="TW", dst_ip="1.160.9.10", probe_id="6181", src_ip="1.160.50.1",
              fqdn="www.gov.tw", protocol="ICMP", msm="1", ts=0):
    """Hops as lists of (ip, rtt) pairs, with None for a silent reply."""
    built = []
    for i, hop in enumerate(hops, 1):
        replies = tuple(UNLABELED if r is None else HopReply(r[0], r[1]) for r in hop)
        built.append(Hop(i, replies or (UNLABELED,)))
    return TraceroutePath(msm, probe_id, src_country, src_ip, fqdn, dst_ip, protocol, ts, tuple(built))


def corpus_file(name):
    return os.path.join(CORPUS, name)


@pytest.fixture(scope="session")
def world():
    probes = load_probes(corpus_file("probes.jsonl")).items
    return Datasets(
        geo=GeoIndex.from_csv(corpus_file("geo.csv")),
        pfx2as=Pfx2AsIndex.from_tsv(corpus_file("pfx2as.tsv")),
        anycast=AnycastIndex.from_csv(corpus_file("anycast.csv")),
        points=CountryPoints.bundled(),
        probes={p.probe_id: p for p in probes},
        hints=HintRules.from_file(corpus_file("hints.txt")),
        hostnames=load_hostnames(corpus_file("hostnames.csv")),
    )


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
