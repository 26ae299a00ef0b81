from __future__ import annotations

import itertools
from datetime import datetime, timezone
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aibom.findings import Finding, finding
from aibom.licenses import And, LicenseId
from aibom.model import (
    Agent,
    AiPackage,
    ConflictError,
    ContainmentCycle,
    CreationInfo,
    DatasetPackage,
    Document,
    EnergyQuantity,
    MetricEntry,
    ModelError,
    Presence,
    Relationship,
    add_element,
    add_relationship,
    containment_graph,
    core_violations,
    is_populated,
    is_present,
    new_document,
    resolve_reference,
)

INFO = CreationInfo("2024-04-16T00:00:00Z", ["urn:ex:wg"])


def doc_with(*elements, relationships=()):
    return Document(INFO, elements, relationships)


def test_new_document_is_empty_shell():
    doc = new_document(INFO)
    assert doc.elements == ()
    assert sorted(f.code for f in core_violations(doc)) == ["DOC-EMPTY", "REF-UNRESOLVED"]


@pytest.mark.parametrize(
    "kwargs, needle",
    [
        ({"created_by": []}, "empty creator list"),
        ({"spec_version": "3"}, "malformed spec version"),
        ({"created": "2024-04-16 00:00:00"}, "YYYY-MM-DD"),
        ({"created": datetime(2024, 1, 1)}, "UTC"),
        ({"created_by": "urn:ex:wg"}, "list"),
    ],
)
def test_creation_info_invariants(kwargs, needle):
    base = {"created": "2024-04-16T00:00:00Z", "created_by": ["urn:ex:wg"]}
    with pytest.raises(ModelError, match=needle):
        CreationInfo(**{**base, **kwargs})


def test_timestamp_second_precision_utc():
    info = CreationInfo(datetime(2024, 1, 2, 3, 4, 5, 999, tzinfo=timezone.utc), ["a"])
    assert info.created == datetime(2024, 1, 2, 3, 4, 5, tzinfo=timezone.utc)


def test_add_element_and_conflict():
    doc = add_element(new_document(INFO), AiPackage(id="urn:ex:model1"))
    assert len(doc.elements) == 1
    with pytest.raises(ConflictError):
        add_element(doc, DatasetPackage(id="urn:ex:model1"))


def test_add_element_leaves_original_unchanged():
    empty = new_document(INFO)
    add_element(empty, Agent(id="urn:ex:wg", name="WG"))
    assert empty.elements == ()


def test_dangling_originator_is_flagged_later():
    doc = add_element(new_document(INFO), Agent(id="urn:ex:wg", name="WG"))
    doc = add_element(doc, DatasetPackage(id="urn:ex:d", originated_by=["urn:ex:nobody"]))
    assert [(f.code, f.path) for f in core_violations(doc)] == [("REF-UNRESOLVED", "urn:ex:d::originatedBy")]


def test_reference_type_checked():
    doc = doc_with(Agent(id="urn:ex:wg", name="WG"), AiPackage(id="m", supplied_by="d"), DatasetPackage(id="d"))
    assert [f.code for f in core_violations(doc)] == ["REF-TYPE"]


def test_resolve_reference_exact_match():
    agent = Agent(id="urn:ex:wg", name="WG")
    doc = doc_with(agent)
    assert resolve_reference(doc, "urn:ex:wg") is agent
    assert resolve_reference(doc, "urn:ex:nope") is None
    assert resolve_reference(doc, "URN:EX:WG") is None


def test_duplicate_ids_rejected_by_document():
    with pytest.raises(ConflictError):
        doc_with(Agent(id="a", name="x"), Agent(id="a", name="y"))


@pytest.mark.parametrize("bad", ["", "a b", "tab\there", 5])
def test_element_id_rules(bad):
    with pytest.raises(ModelError):
        Agent(id=bad, name="x")


def test_agent_name_required():
    with pytest.raises(ModelError):
        Agent(id="a", name="  ")


def contains(a, *b):
    return Relationship(from_=a, type="contains", to=list(b))


@pytest.mark.parametrize(
    "edges, expected",
    [
        ([("A", "B"), ("B", "C")], ["A", "B", "C"]),
        ([("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")], ["A", "B", "C", "D"]),
        ([("C", "A"), ("B", "A")], ["B", "C", "A"]),
    ],
)
def test_containment_order(edges, expected):
    doc = doc_with(*(Agent(id=i, name=i) for i in "ABCD" if any(i in e for e in edges)),
                   relationships=[contains(a, b) for a, b in edges])
    assert containment_graph(doc) == expected


def test_containment_cycle():
    doc = doc_with(Agent(id="A", name="A"), Agent(id="B", name="B"),
                   relationships=[contains("A", "B"), contains("B", "A")])
    result = containment_graph(doc)
    assert isinstance(result, ContainmentCycle) and set(result.members) == {"A", "B"}
    assert "CYCLE" in [f.code for f in core_violations(doc)]


def test_shortest_cycle_reported():
    edges = [("A", "B"), ("B", "C"), ("C", "A"), ("C", "D"), ("D", "C")]
    doc = doc_with(*(Agent(id=i, name=i) for i in "ABCD"), relationships=[contains(a, b) for a, b in edges])
    assert containment_graph(doc).members == ("C", "D")


def _brute_force_least_order(nodes, edges):
    for perm in itertools.permutations(sorted(nodes)):
        pos = {n: i for i, n in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in edges):
            return list(perm)
    return None


@settings(max_examples=150, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)).filter(lambda e: e[0] < e[1]), max_size=8))
def test_containment_order_is_least_topological_order(raw_edges):
    # edges go from lower to higher index, so the graph is acyclic; labels are shuffled
    label = dict(zip(range(6), "DFABEC"))
    edges = [(label[a], label[b]) for a, b in raw_edges]
    doc = doc_with(*(Agent(id=n, name=n) for n in label.values()), relationships=[contains(a, b) for a, b in edges])
    assert containment_graph(doc) == _brute_force_least_order(label.values(), edges)


def test_time_order_violation():
    pkg = AiPackage(id="m", built_time="2024-02-01T00:00:00Z", release_time="2024-01-01T00:00:00Z")
    assert [f.code for f in core_violations(doc_with(Agent(id="urn:ex:wg", name="WG"), pkg))] == ["TIME-ORDER"]


def test_purpose_must_match_profile():
    AiPackage(id="m", primary_purpose="ai-model")
    with pytest.raises(ModelError, match="primaryPurpose"):
        AiPackage(id="m", primary_purpose="dataset")
    with pytest.raises(ModelError, match="primaryPurpose"):
        DatasetPackage(id="d", primary_purpose="library")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"known_bias": [""]},
        {"standard_compliance": ["  "]},
        {"domain": ["a", "a"]},
        {"metric": [{"name": "f1", "value": 1}, {"name": "f1", "value": 2}]},
        {"hyperparameter": [("lr", "1"), ("lr", "2")]},
        {"training_energy_consumption": [{"quantity": -1}]},
        {"training_energy_consumption": [{"quantity": 1, "unit": "joule"}]},
        {"safety_risk_assessment": "extreme"},
        {"autonomy_type": "maybe"},
        {"download_location": "not a uri"},
        {"declared_license": "MIT AND"},
        {"metric": [{"name": "", "value": 1}]},
        {"metric_decision_threshold": [{"name": "f1", "value": "NaN", "decision_threshold": "Infinity"}]},
    ],
)
def test_ai_value_invariants(kwargs):
    with pytest.raises(ModelError):
        AiPackage(id="m", **kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dataset_size": -1},
        {"dataset_size": True},
        {"dataset_type": ["hologram"]},
        {"anonymization_method_used": [""]},
        {"known_bias": [""]},
        {"confidentiality_level": "purple"},
    ],
)
def test_dataset_value_invariants(kwargs):
    with pytest.raises(ModelError):
        DatasetPackage(id="d", **kwargs)


def test_coercion_canonicalizes_values():
    pkg = AiPackage(
        id="m",
        hyperparameter={"b": "1", "a": "2"},
        declared_license="MIT OR Apache-2.0 AND GPL-2.0-only",
        metric=[{"name": "f1", "value": "0.90"}, MetricEntry("acc", Decimal("0.8"))],
        training_energy_consumption=[3],
        use_sensitive_personal_information="NOASSERTION",
    )
    assert pkg.hyperparameter == (("a", "2"), ("b", "1"))
    assert isinstance(pkg.declared_license.right, And)
    assert pkg.metric[0].value == "0.90"  # text stays text
    assert pkg.training_energy_consumption == (EnergyQuantity(Decimal(3)),)
    assert pkg.use_sensitive_personal_information is Presence.NO_ASSERTION


def test_equal_regardless_of_construction_order():
    a = AiPackage(id="m", hyperparameter={"x": "1", "y": "2"})
    b = AiPackage(id="m", hyperparameter=[("y", "2"), ("x", "1")])
    assert a == b


@pytest.mark.parametrize(
    "value, present, populated",
    [
        (None, False, False),
        ((), False, False),
        ("NOASSERTION", True, False),
        (Presence.NO_ASSERTION, True, False),
        (Presence.NO, True, True),
        ("", True, False),
        ("x", True, True),
        (LicenseId("MIT"), True, True),
    ],
)
def test_present_vs_populated(value, present, populated):
    assert is_present(value) is present
    assert is_populated(value) is populated


def test_finding_registry_enforced():
    with pytest.raises(ValueError):
        Finding("p", "NOT-A-CODE", "error", "m")
    with pytest.raises(ValueError):
        finding("ALIAS", "", "m")


def test_add_relationship_keeps_canonical_order():
    doc = doc_with(Agent(id="a", name="a"), Agent(id="b", name="b"))
    r1, r2 = contains("b", "a"), Relationship(from_="a", type="other", to=["b"])
    assert add_relationship(add_relationship(doc, r1), r2) == add_relationship(add_relationship(doc, r2), r1)
