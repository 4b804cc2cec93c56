"""Link graph construction, influence tracing, and linkage accounting."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from conftest import (
    make_change,
    make_contribution,
    make_run,
    make_test,
    make_tombstone,
    oracle_edges,
    oracle_is_deployment,
    stamp,
)
from pledger.errors import UnknownNode, WrongEntryType
from pledger.fixtures import ARTIFACT_ID, CONTRIBUTION_ID, DEPLOYMENT_ID, TEST_ID
from pledger.graph import build_graph, linkage_completeness, trace_influence
from pledger.model import ActorRef, ArtifactPayload, EntryEnvelope, EntryType, LinkSet

LINK_KINDS = ("influences", "influencedBy", "motivates", "usesTest",
              "evaluates", "remediates", "deployedAs", "evidence")


# -- fixture graph shape -------------------------------------------------------

def test_fixture_edge_orientation(lifecycle):
    _, ids, entries = lifecycle
    graph = build_graph(entries)

    # motivates is declared on the Test but points contribution -> test.
    assert (CONTRIBUTION_ID, TEST_ID) in graph.edge_pairs("motivates")
    assert graph.out(CONTRIBUTION_ID, "motivates") == [TEST_ID]
    assert graph.out(TEST_ID, "motivates") == []

    uses = graph.edge_pairs("usesTest")
    assert (ids["change_initial"], TEST_ID) in uses
    assert (ids["change_remediation"], TEST_ID) in uses
    for run in ("run_v1", "run_v2", "run_v3"):
        assert (ids[run], TEST_ID) in uses

    assert graph.edge_pairs("evaluates") == {
        (ids["run_v1"], f"{ARTIFACT_ID}:v1"),
        (ids["run_v2"], f"{ARTIFACT_ID}:v2"),
        (ids["run_v3"], f"{ARTIFACT_ID}:v3"),
    }
    assert graph.edge_pairs("deployedAs") == {
        (f"{ARTIFACT_ID}:v1", DEPLOYMENT_ID),
        (f"{ARTIFACT_ID}:v2", DEPLOYMENT_ID),
        (f"{ARTIFACT_ID}:v3", DEPLOYMENT_ID),
    }
    assert graph.edge_pairs("remediates") == {
        (ids["change_remediation"], ids["run_v2"])}

    # influences includes the reverse reading of declared influencedBy.
    influences = graph.edge_pairs("influences")
    assert (CONTRIBUTION_ID, TEST_ID) in influences
    assert (CONTRIBUTION_ID, ids["change_initial"]) in influences
    assert (CONTRIBUTION_ID, ids["change_remediation"]) in influences
    assert (TEST_ID, CONTRIBUTION_ID) in graph.edge_pairs("influencedBy")


def test_fixture_edges_match_raw_link_scan(lifecycle):
    _, _, entries = lifecycle
    graph = build_graph(entries)
    for kind in LINK_KINDS:
        assert graph.edge_pairs(kind) == oracle_edges(entries, kind), kind


def test_random_edges_match_raw_link_scan():
    from conftest import random_envelope

    for seed in range(20):
        rng = random.Random(seed)
        entries = [random_envelope(rng, i) for i in range(rng.randint(3, 25))]
        graph = build_graph(entries)
        for kind in LINK_KINDS:
            assert graph.edge_pairs(kind) == oracle_edges(entries, kind), (seed, kind)
        for entry in entries:
            assert graph.is_deployment(entry.id) == oracle_is_deployment(entry)


def test_deployment_detection(lifecycle):
    _, _, entries = lifecycle
    graph = build_graph(entries)
    assert graph.deployment_ids() == [DEPLOYMENT_ID]
    assert graph.is_deployment(DEPLOYMENT_ID)
    assert not graph.is_deployment(f"{ARTIFACT_ID}:v1")
    assert not graph.is_deployment(CONTRIBUTION_ID)
    assert not graph.is_deployment("pl:artifact:gen:unknown")


def test_redacted_deployment_still_counts_when_deployed_to():
    deployment = EntryEnvelope(
        id="pl:artifact:gen:dep",
        entry_type=EntryType.ARTIFACT,
        created_at=stamp(1),
        actor=ActorRef(role="deployer", pseudonym="D1"),
        payload=ArtifactPayload(
            artifact_id="pl:artifact:gen:dep",
            artifact_kind="extension:deployment",
            version="v1",
            content_ref="https://gen.example/dep",
            boundary="consultation_workflow",
        ),
    )
    source = EntryEnvelope(
        id="pl:artifact:gen:sys:v1",
        entry_type=EntryType.ARTIFACT,
        created_at=stamp(2),
        actor=ActorRef(role="maintainer", pseudonym="M1"),
        payload=ArtifactPayload(
            artifact_id="pl:artifact:gen:sys",
            artifact_kind="model",
            version="v1",
            content_ref="https://gen.example/v1",
        ),
        links=LinkSet(deployed_as=[deployment.id]),
    )
    graph = build_graph([deployment, source, make_tombstone(deployment.id)])
    assert graph.node(deployment.id).redacted
    assert graph.node(deployment.id).payload is None
    assert graph.is_deployment(deployment.id)

    # Without an incoming deployedAs edge the hidden payload proves nothing.
    lonely = build_graph([deployment, make_tombstone(deployment.id)])
    assert not lonely.is_deployment(deployment.id)


def test_influence_views_are_symmetric():
    a = make_contribution(1, links=LinkSet(influences=["pl:contrib:gen:0002"]))
    b = make_contribution(2)
    c = make_contribution(3, links=LinkSet(influenced_by=["pl:contrib:gen:0001"]))
    graph = build_graph([a, b, c])
    assert graph.influence_targets(a.id) == [b.id, c.id]
    assert graph.influence_sources(b.id) == [a.id]
    assert graph.influence_sources(c.id) == [a.id]
    assert graph.influence_targets(b.id) == []


def test_unknown_node_raises():
    graph = build_graph([make_contribution(1)])
    with pytest.raises(UnknownNode):
        graph.node("pl:contrib:gen:9999")
    assert graph.out("pl:contrib:gen:9999", "influences") == []


# -- influence tracing ----------------------------------------------------------

def test_trace_influence_fixture_paths(lifecycle):
    _, ids, entries = lifecycle
    graph = build_graph(entries)
    result = trace_influence(graph, CONTRIBUTION_ID)
    assert not result.truncated
    assert result.paths == [
        [CONTRIBUTION_ID, TEST_ID, ids[f"run_{v}"], f"{ARTIFACT_ID}:{v}", DEPLOYMENT_ID]
        for v in ("v1", "v2", "v3")
    ]


def test_trace_influence_matches_exhaustive_enumeration(lifecycle):
    _, _, entries = lifecycle
    known = {e.id for e in entries}
    per_kind = {kind: oracle_edges(entries, kind) for kind in LINK_KINDS}

    def successors(nid: str) -> list[str]:
        succ = {t for s, t in per_kind["influences"] if s == nid}
        succ |= {t for s, t in per_kind["motivates"] if s == nid}
        succ |= {s for s, t in per_kind["usesTest"] if t == nid}
        succ |= {t for s, t in per_kind["evaluates"] if s == nid}
        succ |= {t for s, t in per_kind["deployedAs"] if s == nid}
        return sorted(succ & known)

    deployments = {e.id for e in entries if oracle_is_deployment(e)}
    expected: list[list[str]] = []

    def walk(nid: str, path: list[str]) -> None:
        if nid in deployments:
            expected.append(list(path))
            return
        for s in successors(nid):
            if s not in path:
                path.append(s)
                walk(s, path)
                path.pop()

    walk(CONTRIBUTION_ID, [CONTRIBUTION_ID])
    expected.sort()
    result = trace_influence(build_graph(entries), CONTRIBUTION_ID)
    assert result.paths == expected


def test_trace_influence_truncation():
    entries = []
    prev: str | None = None
    for i in range(1, 9):
        links = LinkSet(influenced_by=[prev]) if prev else LinkSet()
        entry = make_contribution(i, links=links)
        entries.append(entry)
        prev = entry.id
    deployment = EntryEnvelope(
        id="pl:artifact:gen:dep",
        entry_type=EntryType.ARTIFACT,
        created_at=stamp(50),
        actor=ActorRef(role="deployer", pseudonym="D1"),
        payload=ArtifactPayload(
            artifact_id="pl:artifact:gen:dep",
            artifact_kind="extension:deployment",
            version="v1",
            content_ref="https://gen.example/dep",
            boundary="workshop",
        ),
        links=LinkSet(influenced_by=[prev]),
    )
    entries.append(deployment)

    graph = build_graph(entries)
    full = trace_influence(graph, "pl:contrib:gen:0001")
    assert full.paths == [[e.id for e in entries]]
    assert not full.truncated

    short = trace_influence(graph, "pl:contrib:gen:0001", max_length=4)
    assert short.paths == []
    assert short.truncated

    exact = trace_influence(graph, "pl:contrib:gen:0001", max_length=8)
    assert exact.paths == [[e.id for e in entries]]
    assert not exact.truncated


def test_trace_influence_survives_cycles():
    a = make_contribution(1, links=LinkSet(influences=["pl:contrib:gen:0002"]))
    b = make_contribution(2, links=LinkSet(influences=["pl:contrib:gen:0001"]))
    graph = build_graph([a, b])
    result = trace_influence(graph, a.id)
    assert result.paths == []
    assert not result.truncated


def test_trace_influence_rejects_non_contributions(lifecycle):
    _, _, entries = lifecycle
    graph = build_graph(entries)
    with pytest.raises(WrongEntryType):
        trace_influence(graph, TEST_ID)
    with pytest.raises(UnknownNode):
        trace_influence(graph, "pl:contrib:gen:9999")


# -- linkage completeness --------------------------------------------------------

def test_linkage_fixture_is_fully_traceable(lifecycle):
    _, _, entries = lifecycle
    report = linkage_completeness(build_graph(entries))
    assert report.total_changes == 2
    assert report.changes_with_contribution == 2
    assert report.changes_with_test == 2
    assert report.changes_fully_linked == 2
    assert report.tests_with_run == 1
    assert report.completeness_ratio == Fraction(1)
    assert report.dangling == [(CONTRIBUTION_ID, "pl:evidence:workshoplog:001")]
    doc = report.to_doc()
    assert doc["completenessRatio"] == "1"
    assert doc["completenessRatioDecimal"] == 1.0
    assert doc["dangling"] == [
        {"entryId": CONTRIBUTION_ID, "target": "pl:evidence:workshoplog:001"}]


def test_linkage_empty_ledger_ratio_is_one():
    report = linkage_completeness(build_graph([make_contribution(1)]))
    assert report.total_changes == 0
    assert report.completeness_ratio == Fraction(1)


def test_linkage_change_reached_through_run():
    contrib = make_contribution(1)
    test = make_test(1)
    change = make_change(1, influenced_by=[contrib.id], versions=("v4",))
    run = make_run(1, test_id=test.id, version="v4")
    report = linkage_completeness(build_graph([contrib, test, change, run]))
    assert report.changes_with_test == 1
    assert report.changes_fully_linked == 1
    assert report.completeness_ratio == Fraction(1)

    # The same run on a different version proves nothing about the change.
    other = make_run(2, test_id=test.id, version="v9")
    report = linkage_completeness(build_graph([contrib, test, change, other]))
    assert report.changes_with_test == 0
    assert report.completeness_ratio == Fraction(0)


def test_linkage_redacted_pieces_stop_counting():
    contrib = make_contribution(1)
    test = make_test(1)
    change = make_change(1, influenced_by=[contrib.id], uses_test=[test.id])
    base = [contrib, test, change]
    assert linkage_completeness(build_graph(base)).completeness_ratio == Fraction(1)

    redacted_change = base + [make_tombstone(change.id)]
    report = linkage_completeness(build_graph(redacted_change))
    assert report.changes_with_contribution == 1
    assert report.changes_with_test == 0
    assert report.completeness_ratio == Fraction(0)

    run = make_run(1, test_id=test.id, version="v1")
    with_run = [contrib, test, make_change(2, influenced_by=[contrib.id]), run,
                make_tombstone(run.id)]
    report = linkage_completeness(build_graph(with_run))
    assert report.changes_with_test == 0


def test_linkage_evidence_links_only_count_when_asked():
    contrib = make_contribution(1)
    test = make_test(1)
    change = make_change(1, uses_test=[test.id])
    change.links.evidence.append(contrib.id)
    graph = build_graph([contrib, test, change])
    assert linkage_completeness(graph).changes_with_contribution == 0
    assert linkage_completeness(
        graph, include_evidence=True).changes_with_contribution == 1


def test_linkage_matches_naive_recount_on_random_graphs():
    for seed in range(30):
        rng = random.Random(1000 + seed)
        contribs = [make_contribution(i) for i in range(1, rng.randint(2, 5))]
        tests = [make_test(j) for j in range(rng.randint(1, 3))]
        versions = [f"v{k}" for k in range(1, 6)]
        changes = []
        for j in range(rng.randint(1, 6)):
            influenced = [rng.choice(contribs).id] if rng.random() < 0.6 else []
            if rng.random() < 0.2:
                influenced.append("pl:contrib:gen:9999")  # unresolvable
            used = [rng.choice(tests).id] if rng.random() < 0.4 else []
            changes.append(make_change(
                j, influenced_by=influenced, uses_test=used,
                versions=rng.sample(versions, rng.randint(1, 2))))
        runs = [
            make_run(j, test_id=rng.choice(tests).id, version=rng.choice(versions))
            for j in range(rng.randint(0, 6))]
        entries = contribs + tests + changes + runs
        rng.shuffle(entries)

        contrib_ids = {c.id for c in contribs}
        test_ids = {t.id for t in tests}
        runs_by_key: dict[tuple[str, str], list] = {}
        for r in runs:
            runs_by_key.setdefault((r.payload.artifact_id, r.payload.version), []).append(r)

        expect_contribution = expect_test = expect_full = 0
        for change in changes:
            has_contribution = any(
                t in contrib_ids for t in change.links.influenced_by)
            has_test = any(t in test_ids for t in change.links.uses_test)
            if not has_test:
                for ca in change.payload.changed_artifacts:
                    for r in runs_by_key.get((ca.artifact_id, ca.version_after), []):
                        if any(t in test_ids for t in r.links.uses_test):
                            has_test = True
            expect_contribution += has_contribution
            expect_test += has_test
            expect_full += has_contribution and has_test

        report = linkage_completeness(build_graph(entries))
        assert report.total_changes == len(changes)
        assert report.changes_with_contribution == expect_contribution
        assert report.changes_with_test == expect_test
        assert report.changes_fully_linked == expect_full
        assert report.completeness_ratio == Fraction(expect_full, len(changes))


def test_edge_list_export(tmp_path):
    a = make_contribution(1, links=LinkSet(influences=["pl:test:gen:001"]))
    test = make_test(1)
    test.links.motivates.append(a.id)
    graph = build_graph([a, test])
    text = graph.edge_list_text()
    assert text.splitlines() == [
        f"{a.id}\tinfluences\t{test.id}",
        f"{a.id}\tmotivates\t{test.id}",
    ]
    out = tmp_path / "edges.tsv"
    graph.write_edge_list(out)
    assert out.read_text() == text
