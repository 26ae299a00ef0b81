from __future__ import annotations

import pytest
from hypothesis import given, settings

from aibom.model import AiPackage, CreationInfo, Document, Relationship, core_violations
from aibom.serialization import (
    ReadError,
    WriteError,
    canonicalize,
    parse_raw,
    quote,
    raw_to_plain,
    read_document,
    write_document,
)
from conftest import fixture_bytes, load
from strategies import documents

HEADER = """\
"@context": "urn:aibom:interchange:1"
creationInfo:
  specVersion: "3.0.0"
  created: "2024-01-15T09:00:00Z"
  createdBy:
    - "urn:a"
"""
AGENT = """\
  - spdxId: "urn:a"
    type: "Agent"
    name: "A"
"""


def doc_text(elements: str = "", extra: str = "") -> str:
    return HEADER + "elements:\n" + AGENT + elements + extra


def test_full_fixture_is_canonical():
    assert canonicalize(fixture_bytes("full.aibom")) == fixture_bytes("full.aibom")


def test_reordered_canonicalizes_to_same_bytes():
    assert canonicalize(fixture_bytes("reordered.aibom")) == fixture_bytes("full.aibom")


@pytest.mark.parametrize(
    "name", ["full.aibom", "reordered.aibom", "minimal.aibom", "card.aibom", "empty-fields.aibom"]
)
def test_fixture_round_trip(name):
    doc, _ = load(name)
    again, findings = read_document(write_document(doc))
    assert again == doc
    assert findings == []


def test_minimal_has_no_read_findings():
    doc, findings = load("minimal.aibom")
    assert findings == [] and len(doc.elements) == 2


def test_duplicate_id_reports_both_locations():
    with pytest.raises(ReadError) as info:
        load("duplicate-id.aibom")
    assert str(info.value) == (
        "line 13, column 5: duplicate element id 'urn:example:org:acme' (first defined at line 8, column 5)"
    )
    assert (info.value.line, info.value.column) == (13, 5)


def test_alias_normalized_with_warning():
    doc, findings = load("alias.aibom")
    assert [f.code for f in findings] == ["ALIAS"]
    assert findings[0].path == "urn:example:model:tiny::standardCompliance"
    assert doc.index["urn:example:model:tiny"].standard_compliance == ("ISO/IEC 42001",)
    assert b"standardCompliance" in write_document(doc)
    assert b"standardsCompliance" not in write_document(doc)


def test_unknown_fields_survive_round_trip():
    doc, findings = load("unknown-field.aibom")
    assert [f.code for f in findings] == ["UNKNOWN-FIELD", "UNKNOWN-FIELD"]
    model = doc.index["urn:example:model:tiny"]
    assert model.extensions == {
        "securityVexStatus": "not_affected",
        "buildSystem": {"tool": "bazel", "targets": ("//model:all",)},
    }
    again, refindings = read_document(write_document(doc))
    assert again == doc and refindings == []


def test_unknown_top_level_and_creation_info_keys():
    text = HEADER.replace('  createdBy:', '  tool: "x"\n  createdBy:') + "elements:\n" + AGENT + "comment: 1\n"
    doc, findings = read_document(text)
    assert sorted(f.path for f in findings) == ["creationInfo::tool", "document::comment"]
    assert doc.extensions == {"creationInfo.tool": "x", "comment": "1"}
    assert read_document(write_document(doc))[0] == doc


def test_duplicate_key_rejected():
    text = doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    name: "x"\n    name: "y"\n')
    with pytest.raises(ReadError, match=r"line 14, column 5: duplicate key 'name' \(first defined at line 13, column 5\)"):
        read_document(text)


def test_alias_and_canonical_spelling_together_rejected():
    text = doc_text(
        '  - spdxId: "urn:m"\n    type: "AiPackage"\n    standardCompliance: ["a"]\n    standardsCompliance: ["b"]\n'
    )
    with pytest.raises(ReadError, match="given twice"):
        read_document(text)


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty input"),
        ("a: [1, 2", "malformed input"),
        (b"\xff\xfe", "not UTF-8"),
        ("- 1\n", "document must be a mapping"),
        (HEADER.replace("urn:aibom:interchange:1", "urn:other"), "unsupported @context"),
        (HEADER.split("\n", 1)[1], "missing '@context'"),
        ('"@context": "urn:aibom:interchange:1"\n', "missing 'creationInfo'"),
        (HEADER.replace('  specVersion: "3.0.0"\n', ""), "missing 'spec_version'"),
        (doc_text('  - type: "AiPackage"\n'), "missing 'spdxId'"),
        (doc_text('  - spdxId: "urn:m"\n'), "missing 'type'"),
        (doc_text('  - spdxId: "urn:m"\n    type: "Widget"\n'), "unknown element type 'Widget'"),
        (doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    safetyRiskAssessment: "extreme"\n'),
         "safetyRiskAssessment"),
        (doc_text('  - spdxId: "urn:m"\n    type: "DatasetPackage"\n    datasetSize: "-3"\n'), "datasetSize"),
        (doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    typeOfModel: "cnn"\n'), "must be a list"),
        (doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    declaredLicense: "(MIT OR"\n'), "offset 7"),
        (doc_text(extra='relationships:\n  - from: "urn:a"\n    type: "contains"\n'), "missing 'to'"),
        (doc_text(extra='relationships:\n  - from: "urn:a"\n    type: "likes"\n    to: ["urn:a"]\n'), "likes"),
    ],
)
def test_malformed_input_rejected_with_location(text, match):
    with pytest.raises(ReadError, match=match):
        read_document(text)


def test_error_location_points_at_value():
    text = doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    safetyRiskAssessment: "extreme"\n')
    with pytest.raises(ReadError) as info:
        read_document(text)
    assert (info.value.line, info.value.column) == (13, 27)


def test_null_field_is_absent():
    doc, _ = read_document(doc_text('  - spdxId: "urn:m"\n    type: "AiPackage"\n    limitation: null\n'))
    assert doc.index["urn:m"].limitation is None


def test_write_refuses_empty_document():
    doc = Document(CreationInfo("2024-01-15T09:00:00Z", ["urn:a"]), (), ())
    assert "DOC-EMPTY" in {f.code for f in core_violations(doc)}
    with pytest.raises(WriteError, match="refusing to write"):
        write_document(doc)


def test_write_refuses_unresolved_reference():
    doc = Document(
        CreationInfo("2024-01-15T09:00:00Z", ["urn:a"]),
        (AiPackage(id="urn:m"),),
        (Relationship(from_="urn:m", type="contains", to=["urn:ghost"]),),
    )
    with pytest.raises(WriteError, match="REF-UNRESOLVED"):
        write_document(doc)


@pytest.mark.parametrize(
    "text",
    ["plain", "", "yes", "null", "a\nb", 'quote " and \\ slash', "tab\there", "\x00\x07\x1b", "  sep",
     "﻿bom", "emoji \U0001F600", "#not a comment", "- dash", "  padded  "],
)
def test_quote_round_trips_through_yaml(text):
    assert raw_to_plain(parse_raw(f"k: {quote(text)}\n")) == {"k": text}


@pytest.mark.parametrize("value", ["1.10", "0.000", "-0", "1e3", "12345678901234567890.123456789012345"])
def test_metric_numbers_are_exact(value):
    text = doc_text(f'  - spdxId: "urn:m"\n    type: "AiPackage"\n    metric:\n      - name: "acc"\n        value: {value}\n')
    doc, _ = read_document(text)
    assert read_document(write_document(doc))[0] == doc


@settings(max_examples=200, deadline=None)
@given(documents())
def test_write_read_identity(generated):
    doc, _, _ = generated
    data = write_document(doc)
    again, findings = read_document(data)
    assert again == doc
    assert findings == []
    assert write_document(again) == data


@settings(max_examples=100, deadline=None)
@given(documents())
def test_output_independent_of_input_order(generated):
    doc, elements, relationships = generated
    shuffled = Document(doc.creation_info, tuple(reversed(elements)), tuple(reversed(relationships)), doc.extensions)
    assert write_document(shuffled) == write_document(doc)
