"""Reading and writing documents in the interchange format.

The interchange format is a block-style YAML subset. Input is parsed with PyYAML's composer so every node keeps its source
location; output is produced by a small emitter that fixes the byte layout:
LF line endings, two-space indentation, double-quoted strings, elements sorted
by id and fields in catalog order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from typing import Any, Optional

import yaml

from aibom.catalog import FieldDescriptor, default_catalog
from aibom.findings import Finding, field_path, finding, sort_findings
from aibom.licenses import (
    And,
    LicenseId,
    LicenseParseError,
    LicenseRef,
    Or,
    With,
    parse_license_expression,
    render_license_expression,
)
from aibom.model import (
    ELEMENT_TYPES,
    Agent,
    BasePackage,
    CreationInfo,
    Document,
    EnergyQuantity,
    MetricEntry,
    ModelError,
    Relationship,
    _coerce_field,
    core_violations,
    format_decimal,
    format_timestamp,
    to_decimal,
    type_name,
)

CONTEXT = "urn:aibom:interchange:1"

# libyaml's composer is an order of magnitude faster and keeps the same marks
_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)

_INT_TAG = "tag:yaml.org,2002:int"
_FLOAT_TAG = "tag:yaml.org,2002:float"
_NULL_TAG = "tag:yaml.org,2002:null"
_STR_TAG = "tag:yaml.org,2002:str"


class ReadError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class WriteError(ValueError):
    pass


@dataclass
class RawNode:
    """A node of the surface tree, before binding to the model.

    ``kind`` is ``map``, ``seq`` or ``scalar``. Map nodes hold ``(key, value)``
    node pairs in source order; lines and columns are 1-based.
    """

    kind: str
    line: int
    column: int
    value: str = ""
    tag: str = _STR_TAG
    items: list = field(default_factory=list)

    @property
    def where(self) -> str:
        return f"line {self.line}, column {self.column}"

    def fail(self, message: str) -> ReadError:
        return ReadError(message, self.line, self.column)

    @property
    def is_null(self) -> bool:
        return self.kind == "scalar" and self.tag == _NULL_TAG


def _convert(node: yaml.Node) -> RawNode:
    line, column = node.start_mark.line + 1, node.start_mark.column + 1
    if isinstance(node, yaml.MappingNode):
        out = RawNode("map", line, column, tag=node.tag)
        seen: dict[str, RawNode] = {}
        for k, v in node.value:
            key = _convert(k)
            if key.kind != "scalar":
                raise key.fail("mapping keys must be scalars")
            if key.value in seen:
                first = seen[key.value]
                raise key.fail(f"duplicate key {key.value!r} (first defined at {first.where})")
            seen[key.value] = key
            out.items.append((key, _convert(v)))
        return out
    if isinstance(node, yaml.SequenceNode):
        return RawNode("seq", line, column, tag=node.tag, items=[_convert(v) for v in node.value])
    return RawNode("scalar", line, column, value=node.value, tag=node.tag)


def parse_raw(data: bytes | str) -> RawNode:
    """Parse surface syntax into a :class:`RawNode` tree."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ReadError(f"input is not UTF-8: {exc}") from None
    try:
        node = yaml.compose(data, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ReadError(f"malformed input: {exc.problem or exc}", line, column) from None
    except yaml.YAMLError as exc:
        raise ReadError(f"malformed input: {exc}") from None
    if node is None:
        raise ReadError("empty input")
    return _convert(node)


# -- binding ---------------------------------------------------------------


def _scalar(node: RawNode, what: str) -> str:
    if node.kind != "scalar":
        raise node.fail(f"{what} must be a single value, got a {'mapping' if node.kind == 'map' else 'list'}")
    return node.value


def _seq(node: RawNode, what: str) -> list[RawNode]:
    if node.kind != "seq":
        raise node.fail(f"{what} must be a list")
    return node.items


def _map(node: RawNode, what: str) -> list[tuple[RawNode, RawNode]]:
    if node.kind != "map":
        raise node.fail(f"{what} must be a mapping")
    return node.items


def _number(node: RawNode, what: str) -> Decimal:
    text = _scalar(node, what)
    try:
        return to_decimal(text)
    except ModelError:
        raise node.fail(f"{what}: {text!r} is not a finite decimal number") from None


def raw_to_plain(node: RawNode) -> Any:
    """Turn a raw subtree into nested dict / tuple / str, as stored in extensions."""
    if node.kind == "map":
        return {k.value: raw_to_plain(v) for k, v in node.items}
    if node.kind == "seq":
        return tuple(raw_to_plain(v) for v in node.items)
    return node.value


def _field_value(desc: FieldDescriptor, node: RawNode) -> Any:
    kind = desc.value_kind
    what = desc.name
    if desc.cardinality == "zero-or-more":
        if kind == "mapping":
            return {k.value: _scalar(v, f"{what}[{k.value}]") for k, v in _map(node, what)}
        return [_item_value(desc, item) for item in _seq(node, what)]
    return _item_value(desc, node)


def _item_value(desc: FieldDescriptor, node: RawNode) -> Any:
    kind = desc.value_kind
    what = desc.name
    if kind == "integer":
        text = _scalar(node, what)
        if node.tag not in (_INT_TAG, _STR_TAG) or not text.isdigit():
            raise node.fail(f"{what}: {text!r} is not a non-negative integer")
        return int(text)
    if kind == "license-expression":
        text = _scalar(node, what)
        try:
            return parse_license_expression(text)
        except LicenseParseError as exc:
            raise node.fail(f"{what}: {exc}") from None
    if kind == "energy-list":
        entry = {k.value: v for k, v in _map(node, f"{what} entry")}
        unknown = set(entry) - {"quantity", "unit"}
        if unknown or "quantity" not in entry:
            raise node.fail(f"{what} entries need 'quantity' and optional 'unit' (got {sorted(entry)})")
        kwargs: dict[str, Any] = {"quantity": _number(entry["quantity"], f"{what}.quantity")}
        if "unit" in entry:
            kwargs["unit"] = _scalar(entry["unit"], f"{what}.unit")
        return kwargs
    if kind == "metric-list":
        entry = {k.value: v for k, v in _map(node, f"{what} entry")}
        unknown = set(entry) - {"name", "value", "decisionThreshold"}
        if unknown or "name" not in entry or "value" not in entry:
            raise node.fail(f"{what} entries need 'name' and 'value' (got {sorted(entry)})")
        value_node = entry["value"]
        if value_node.kind == "scalar" and value_node.tag in (_INT_TAG, _FLOAT_TAG):
            value: Any = _number(value_node, f"{what}.value")
        else:
            value = _scalar(value_node, f"{what}.value")
        kwargs = {"name": _scalar(entry["name"], f"{what}.name"), "value": value}
        if "decisionThreshold" in entry:
            kwargs["decision_threshold"] = _number(entry["decisionThreshold"], f"{what}.decisionThreshold")
        return kwargs
    return _scalar(node, what)


def _element_id(node: RawNode, items: list[tuple[RawNode, RawNode]]) -> tuple[str, RawNode]:
    for k, v in items:
        if k.value == "spdxId":
            return _scalar(v, "spdxId"), v
    raise node.fail("element is missing 'spdxId'")


def _bind_extensions(node: RawNode, what: str) -> dict:
    return {k.value: raw_to_plain(v) for k, v in _map(node, what)}


def _bind_element(node: RawNode, findings: list[Finding]) -> Any:
    items = _map(node, "element")
    element_id, id_node = _element_id(node, items)
    type_node = next((v for k, v in items if k.value == "type"), None)
    if type_node is None:
        raise node.fail(f"element {element_id!r} is missing 'type'")
    type_text = _scalar(type_node, "type")
    cls = ELEMENT_TYPES.get(type_text)
    if cls is None:
        raise type_node.fail(f"unknown element type {type_text!r} (expected one of {', '.join(ELEMENT_TYPES)})")

    kwargs: dict[str, Any] = {"id": element_id}
    extensions: dict[str, Any] = {}
    ext_sources: dict[str, RawNode] = {}
    seen: dict[str, RawNode] = {}

    def stash(key: RawNode, value: Any) -> None:
        if key.value in ext_sources:
            raise key.fail(f"extension {key.value!r} defined twice (also at {ext_sources[key.value].where})")
        ext_sources[key.value] = key
        extensions[key.value] = value

    for key, value in items:
        name = key.value
        if name in ("spdxId", "type"):
            continue
        if name == "extensions":
            for ek, ev in _map(value, "extensions"):
                stash(ek, raw_to_plain(ev))
            continue
        if cls is Agent:
            if name == "name":
                kwargs["name"] = _scalar(value, "name")
            elif name == "kind":
                kwargs["kind"] = _scalar(value, "kind")
            else:
                stash(key, raw_to_plain(value))
                findings.append(
                    finding("UNKNOWN-FIELD", field_path(element_id, name),
                            f"unknown field {name!r} at {key.where} preserved in extensions")
                )
            continue
        hit = default_catalog().lookup(cls.PROFILES, name)
        if hit is None:
            stash(key, raw_to_plain(value))
            findings.append(
                finding("UNKNOWN-FIELD", field_path(element_id, name),
                        f"unknown field {name!r} at {key.where} preserved in extensions")
            )
            continue
        desc, via_alias = hit
        if desc.name in seen:
            raise key.fail(f"field {desc.name!r} given twice (also at {seen[desc.name].where})")
        seen[desc.name] = key
        if via_alias:
            findings.append(
                finding("ALIAS", field_path(element_id, desc.name),
                        f"{name!r} at {key.where} normalized to {desc.name!r}")
            )
        if value.is_null:
            continue
        raw = _field_value(desc, value)
        try:
            kwargs[desc.attr] = _coerce_field(desc, raw)
        except (ModelError, TypeError) as exc:
            raise value.fail(f"{element_id}: {desc.name}: {exc}") from None

    if cls is Agent and "name" not in kwargs:
        raise node.fail(f"agent {element_id!r} is missing 'name'")
    try:
        return cls(extensions=extensions, **kwargs)
    except (ModelError, TypeError) as exc:
        raise node.fail(str(exc)) from None


def _bind_relationship(node: RawNode, index: int, findings: list[Finding]) -> Relationship:
    kwargs: dict[str, Any] = {}
    extensions: dict[str, Any] = {}
    for key, value in _map(node, "relationship"):
        name = key.value
        if name == "from":
            kwargs["from_"] = _scalar(value, "from")
        elif name == "type":
            kwargs["type"] = _scalar(value, "type")
        elif name == "to":
            kwargs["to"] = [_scalar(v, "to") for v in _seq(value, "to")]
        elif name == "completeness":
            kwargs["completeness"] = _scalar(value, "completeness")
        elif name == "extensions":
            extensions.update(_bind_extensions(value, "extensions"))
        else:
            extensions[name] = raw_to_plain(value)
            findings.append(
                finding("UNKNOWN-FIELD", f"relationships[{index}]::{name}",
                        f"unknown field {name!r} at {key.where} preserved in extensions")
            )
    for required in ("from_", "type", "to"):
        if required not in kwargs:
            raise node.fail(f"relationship is missing {required.rstrip('_')!r}")
    try:
        return Relationship(extensions=extensions, **kwargs)
    except ModelError as exc:
        raise node.fail(str(exc)) from None


def _bind_creation_info(node: RawNode, doc_ext: dict, findings: list[Finding]) -> CreationInfo:
    kwargs: dict[str, Any] = {}
    for key, value in _map(node, "creationInfo"):
        name = key.value
        if name == "specVersion":
            kwargs["spec_version"] = _scalar(value, "specVersion")
        elif name == "created":
            kwargs["created"] = _scalar(value, "created")
        elif name == "createdBy":
            kwargs["created_by"] = [_scalar(v, "createdBy") for v in _seq(value, "createdBy")]
        else:
            doc_ext[f"creationInfo.{name}"] = raw_to_plain(value)
            findings.append(
                finding("UNKNOWN-FIELD", f"creationInfo::{name}",
                        f"unknown field {name!r} at {key.where} preserved in extensions")
            )
    for required in ("spec_version", "created", "created_by"):
        if required not in kwargs:
            raise node.fail(f"creationInfo is missing {required!r}")
    try:
        return CreationInfo(**kwargs)
    except ModelError as exc:
        raise node.fail(str(exc)) from None


def bind_document(root: RawNode) -> tuple[Document, list[Finding]]:
    findings: list[Finding] = []
    top = dict((k.value, (k, v)) for k, v in _map(root, "document"))
    if "@context" not in top:
        raise root.fail("missing '@context' header")
    context = _scalar(top["@context"][1], "@context")
    if context != CONTEXT:
        raise top["@context"][1].fail(f"unsupported @context {context!r} (expected {CONTEXT!r})")
    if "creationInfo" not in top:
        raise root.fail("missing 'creationInfo'")
    doc_ext: dict[str, Any] = {}
    info = _bind_creation_info(top["creationInfo"][1], doc_ext, findings)

    elements = []
    first_seen: dict[str, RawNode] = {}
    if "elements" in top:
        for item in _seq(top["elements"][1], "elements"):
            element = _bind_element(item, findings)
            if element.id in first_seen:
                raise item.fail(
                    f"duplicate element id {element.id!r} (first defined at {first_seen[element.id].where})"
                )
            first_seen[element.id] = item
            elements.append(element)

    relationships = []
    if "relationships" in top:
        for n, item in enumerate(_seq(top["relationships"][1], "relationships")):
            relationships.append(_bind_relationship(item, n, findings))

    for name, (key, value) in top.items():
        if name in ("@context", "creationInfo", "elements", "relationships"):
            continue
        if name == "extensions":
            for ek, ev in _map(value, "extensions"):
                doc_ext[ek.value] = raw_to_plain(ev)
            continue
        doc_ext[name] = raw_to_plain(value)
        findings.append(
            finding("UNKNOWN-FIELD", f"document::{name}", f"unknown field {name!r} at {key.where} preserved in extensions")
        )
    doc = Document(info, tuple(elements), tuple(relationships), doc_ext)
    return doc, sort_findings(findings)


def read_document(data: bytes | str) -> tuple[Document, list[Finding]]:
    """Parse and bind a document, returning it with non-fatal read findings."""
    return bind_document(parse_raw(data))


# -- writing ---------------------------------------------------------------

_PLAIN_KEY_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")
_YAML_WORDS = {"y", "n", "yes", "no", "on", "off", "true", "false", "null", "~"}
_ESCAPES = {"\n": "\\n", "\t": "\\t", "\r": "\\r", "\0": "\\0", '"': '\\"', "\\": "\\\\"}


def quote(text: str) -> str:
    """Double-quoted YAML scalar; anything outside printable ranges is escaped."""
    out = ['"']
    for ch in text:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
            continue
        cp = ord(ch)
        printable = (
            0x20 <= cp <= 0x7E
            or 0xA0 <= cp <= 0xD7FF
            or (0xE000 <= cp <= 0xFFFD and cp != 0xFEFF)
            or 0x10000 <= cp <= 0x10FFFF
        ) and cp not in (0x2028, 0x2029)
        if printable:
            out.append(ch)
        elif cp <= 0xFF:
            out.append(f"\\x{cp:02X}")
        elif cp <= 0xFFFF:
            out.append(f"\\u{cp:04X}")
        else:
            out.append(f"\\U{cp:08X}")
    out.append('"')
    return "".join(out)


def _key(name: str) -> str:
    if name and name[0].isalpha() and set(name) <= _PLAIN_KEY_CHARS and name.lower() not in _YAML_WORDS:
        return name
    return quote(name)


def _scalar_text(value: Any) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not part of the interchange format")
    if isinstance(value, Enum):
        return quote(value.value)
    if isinstance(value, str):
        return quote(value)
    if isinstance(value, Decimal):
        return format_decimal(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, datetime):
        return quote(format_timestamp(value))
    if isinstance(value, (LicenseId, LicenseRef, With, And, Or)):
        return quote(render_license_expression(value))
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _is_block(value: Any) -> bool:
    return isinstance(value, (dict, list, tuple)) and len(value) > 0


def emit(value: Any, indent: int = 0) -> list[str]:
    """Emit a dict / list / scalar tree as block-style lines at ``indent``.

    Dict entries are emitted in their iteration order; callers decide ordering.
    """
    pad = " " * indent
    lines: list[str] = []
    if isinstance(value, dict):
        for k, v in value.items():
            if _is_block(v):
                lines.append(f"{pad}{_key(k)}:")
                lines.extend(emit(v, indent + 2))
            else:
                lines.append(f"{pad}{_key(k)}: {_inline(v)}")
        return lines
    if isinstance(value, (list, tuple)):
        for item in value:
            if _is_block(item):
                sub = emit(item, indent + 2)
                sub[0] = f"{pad}- " + sub[0][indent + 2:]
                lines.extend(sub)
            else:
                lines.append(f"{pad}- {_inline(item)}")
        return lines
    return [pad + _inline(value)]


def _inline(value: Any) -> str:
    if isinstance(value, dict):
        return "{}"
    if isinstance(value, (list, tuple)):
        return "[]"
    return _scalar_text(value)


def _ext_tree(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _ext_tree(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_ext_tree(v) for v in value]
    return value


def _field_tree(desc: FieldDescriptor, value: Any) -> Any:
    if desc.value_kind == "mapping":
        return dict(value)
    if desc.value_kind == "energy-list":
        return [{"quantity": q.quantity, "unit": q.unit} for q in value]
    if desc.value_kind == "metric-list":
        out = []
        for m in value:
            entry: dict[str, Any] = {"name": m.name, "value": m.value}
            if m.decision_threshold is not None:
                entry["decisionThreshold"] = m.decision_threshold
            out.append(entry)
        return out
    if isinstance(value, tuple):
        return list(value)
    return value


def element_tree(element: Any) -> dict[str, Any]:
    tree: dict[str, Any] = {"spdxId": element.id, "type": type_name(element)}
    if isinstance(element, Agent):
        tree["name"] = element.name
        tree["kind"] = element.kind
    else:
        for desc in element.descriptors():
            if desc.name == "spdxId":
                continue
            value = getattr(element, desc.attr)
            if value is None or (isinstance(value, tuple) and not value):
                continue
            tree[desc.name] = _field_tree(desc, value)
    if element.extensions:
        tree["extensions"] = _ext_tree(element.extensions)
    return tree


def relationship_tree(rel: Relationship) -> dict[str, Any]:
    tree: dict[str, Any] = {
        "from": rel.from_,
        "type": rel.type,
        "to": list(rel.to),
        "completeness": rel.completeness,
    }
    if rel.extensions:
        tree["extensions"] = _ext_tree(rel.extensions)
    return tree


def document_tree(doc: Document) -> dict[str, Any]:
    info = doc.creation_info
    tree: dict[str, Any] = {
        "@context": CONTEXT,
        "creationInfo": {
            "specVersion": info.spec_version,
            "created": info.created,
            "createdBy": list(info.created_by),
        },
        "elements": [element_tree(e) for e in doc.elements],
    }
    if doc.relationships:
        tree["relationships"] = [relationship_tree(r) for r in doc.relationships]
    if doc.extensions:
        tree["extensions"] = _ext_tree(doc.extensions)
    return tree


def dump_tree(tree: dict[str, Any]) -> bytes:
    return ("\n".join(emit(tree)) + "\n").encode("utf-8")


def write_document(doc: Document) -> bytes:
    """Canonical bytes for ``doc``; refuses documents that break core invariants."""
    errors = [f for f in core_violations(doc) if f.severity.value == "error"]
    if errors:
        first = errors[0]
        raise WriteError(f"refusing to write: {first.code} at {first.path}: {first.message}")
    return dump_tree(document_tree(doc))


def canonicalize(data: bytes | str) -> bytes:
    doc, _ = read_document(data)
    return write_document(doc)

