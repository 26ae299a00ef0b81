"""Ingest model-hub metadata into partial documents.

A hub response is first turned into a neutral intake record (flattened dotted
keys mapped to text or lists of text). Ingestion rules then copy matched keys
into catalog fields, tagging every value they produce with a provenance note.
Keys without a rule are reported back, never guessed.
"""

from __future__ import annotations

import json
import re
import socket
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Optional, Union

from aibom.catalog import IDENTITY_FIELDS, CatalogError, FieldDescriptor, default_catalog
from aibom.findings import Finding, field_path, finding, sort_findings
from aibom.licenses import LicenseParseError, normalize_license_case, parse_license_expression
from aibom.model import (
    Agent,
    AgentKind,
    AiPackage,
    BasePackage,
    CreationInfo,
    DatasetPackage,
    Document,
    ModelError,
    Relationship,
    RelationshipType,
    _coerce_field,
    format_timestamp,
    is_populated,
    parse_timestamp,
)
from aibom.serialization import ReadError, parse_raw, raw_to_plain

TRANSFORMS = ("copy", "split-list", "parse-size", "parse-license", "to-presence")
INGEST_AGENT_ID = "urn:aibom:agent:hub-ingest"

EntryValue = Union[str, tuple[str, ...]]


class HubRecordError(ValueError):
    pass


class RulesError(ValueError):
    pass


class FetchError(RuntimeError):
    def __init__(self, message: str, status: Optional[int] = None, cause: Optional[str] = None) -> None:
        super().__init__(message)
        self.status = status
        self.cause = cause


@dataclass(frozen=True)
class HubRecord:
    source: str
    retrieved_at: datetime
    entries: dict[str, EntryValue] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if not isinstance(self.source, str) or not self.source.strip():
            raise HubRecordError("hub record needs a non-empty source")
        try:
            object.__setattr__(self, "retrieved_at", parse_timestamp(self.retrieved_at))
        except ModelError as exc:
            raise HubRecordError(f"retrievedAt: {exc}") from None
        entries = {}
        for key, value in self.entries.items():
            if isinstance(value, (list, tuple)):
                if not all(isinstance(v, str) for v in value):
                    raise HubRecordError(f"entry {key!r}: list items must be text")
                value = tuple(value)
            elif not isinstance(value, str):
                raise HubRecordError(f"entry {key!r}: value must be text or a list of text")
            entries[key] = value
        object.__setattr__(self, "entries", entries)


def parse_hub_record(data: bytes | str) -> HubRecord:
    """Read an intake file: ``source``, ``retrievedAt`` and an ``entries`` mapping."""
    try:
        tree = raw_to_plain(parse_raw(data))
    except ReadError as exc:
        raise HubRecordError(str(exc)) from None
    if not isinstance(tree, dict):
        raise HubRecordError("hub record must be a mapping")
    for key in ("source", "retrievedAt"):
        if not tree.get(key):
            raise HubRecordError(f"hub record is missing {key!r}")
    extra = set(tree) - {"source", "retrievedAt", "entries"}
    if extra:
        raise HubRecordError(f"unknown key(s) in hub record: {', '.join(sorted(extra))}")
    entries = tree.get("entries") or {}
    if not isinstance(entries, dict):
        raise HubRecordError("'entries' must be a mapping")
    for key, value in entries.items():
        if isinstance(value, dict):
            raise HubRecordError(f"entry {key!r} must be flattened (got a nested mapping)")
    return HubRecord(tree["source"], tree["retrievedAt"], entries)


def record_from_json(data: bytes | str, source: str, retrieved_at: datetime | str) -> HubRecord:
    """Flatten a JSON hub response into an intake record (dotted key paths)."""
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise HubRecordError(f"hub response is not JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise HubRecordError("hub response must be a JSON object")
    entries: dict[str, EntryValue] = {}

    def scalar(v: Any) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)

    def walk(prefix: str, value: Any) -> None:
        if value is None:
            return
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(value, list):
            if all(not isinstance(v, (dict, list)) for v in value):
                entries[prefix] = tuple(scalar(v) for v in value if v is not None)
            else:
                for n, v in enumerate(value):
                    walk(f"{prefix}.{n}", v)
        else:
            entries[prefix] = scalar(value)

    walk("", obj)
    return HubRecord(source, retrieved_at, entries)


def fetch_hub_record(base_url: str, model_id: str, timeout: float = 10.0) -> bytes:
    """GET ``{base_url}/api/models/{model_id}``; proxies come from the environment."""
    parts = urllib.parse.urlsplit(base_url)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise FetchError(f"malformed base URL {base_url!r}", cause="malformed-url")
    if not model_id or any(c.isspace() for c in model_id):
        raise FetchError(f"malformed model id {model_id!r}", cause="malformed-url")
    url = f"{base_url.rstrip('/')}/api/models/{urllib.parse.quote(model_id, safe='/')}"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            return response.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"{url}: HTTP {exc.code}", status=exc.code, cause="http-status") from None
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise FetchError(f"{url}: timed out after {timeout}s", cause="timeout") from None
        raise FetchError(f"{url}: {exc.reason}", cause="unreachable") from None
    except (socket.timeout, TimeoutError):
        raise FetchError(f"{url}: timed out after {timeout}s", cause="timeout") from None


@dataclass(frozen=True)
class IngestionRule:
    hub_key: str
    target: FieldDescriptor
    target_profile: str
    transform: str = "copy"

    def __post_init__(self) -> None:
        if self.transform not in TRANSFORMS:
            raise RulesError(f"rule for {self.hub_key!r}: unknown transform {self.transform!r}")
        if self.target.name in IDENTITY_FIELDS:
            raise RulesError(f"rule for {self.hub_key!r}: {self.target.name} is assigned by the mapper")
        if self.target_profile not in ("ai", "dataset"):
            raise RulesError(f"rule for {self.hub_key!r}: target must be ai/... or dataset/...")


@dataclass(frozen=True)
class IngestionRules:
    rules: tuple[IngestionRule, ...]

    def __post_init__(self) -> None:
        seen: dict[tuple[str, str], str] = {}
        for rule in self.rules:
            key = (rule.target_profile, rule.target.name)
            if key in seen:
                raise RulesError(
                    f"target {key[0]}/{key[1]} is fed by both {seen[key]!r} and {rule.hub_key!r}"
                )
            seen[key] = rule.hub_key


def load_ingestion_rules(data: bytes | str) -> IngestionRules:
    try:
        tree = raw_to_plain(parse_raw(data))
    except ReadError as exc:
        raise RulesError(str(exc)) from None
    if not isinstance(tree, dict) or not isinstance(tree.get("rules"), tuple):
        raise RulesError("ingestion rules need a 'rules' list")
    rules = []
    for n, entry in enumerate(tree["rules"]):
        if not isinstance(entry, dict) or not entry.get("hubKey") or not entry.get("target"):
            raise RulesError(f"rule #{n + 1} needs 'hubKey' and 'target'")
        target = entry["target"]
        try:
            desc = default_catalog().resolve_ref(target)
        except CatalogError as exc:
            raise RulesError(f"rule for {entry['hubKey']!r}: {exc}") from None
        rules.append(IngestionRule(entry["hubKey"], desc, target.partition("/")[0], entry.get("transform", "copy")))
    return IngestionRules(tuple(rules))


@lru_cache(maxsize=None)
def default_ingestion_rules() -> IngestionRules:
    return load_ingestion_rules(resources.files("aibom").joinpath("data/ingestion-rules.yaml").read_bytes())


class Origin(str, Enum):
    HUB_AUTOMATED = "hub-automated"
    MANUAL = "manual"
    DERIVED = "derived"


@dataclass(frozen=True, order=True)
class ProvenanceNote:
    field_path: str
    origin: Origin
    source: str
    retrieved_at: datetime

    def __post_init__(self) -> None:
        if not self.field_path:
            raise ValueError("provenance note needs a field path")


class TransformError(ValueError):
    pass


_SIZE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kKmMbBgG]?)\s*$")
_SIZE_FACTORS = {"": 1, "k": 10**3, "m": 10**6, "b": 10**9, "g": 10**9}
_TRUE = {"true", "yes", "1"}
_FALSE = {"false", "no", "0"}


def _as_list(value: EntryValue) -> list[str]:
    return list(value) if isinstance(value, tuple) else [value]


def apply_transform(transform: str, value: EntryValue) -> Any:
    """Run one named transform; raises :class:`TransformError` when it does not apply."""
    if transform == "copy":
        return value
    if transform == "split-list":
        items = []
        for chunk in _as_list(value):
            items.extend(p.strip() for p in chunk.split(","))
        return tuple(i for i in items if i)
    if isinstance(value, tuple):
        if len(value) != 1:
            raise TransformError(f"{transform} needs a single value, got {len(value)}")
        value = value[0]
    if transform == "parse-size":
        m = _SIZE.match(value)
        if not m:
            raise TransformError(f"cannot read a size from {value!r}")
        number = Decimal(m.group(1)) * _SIZE_FACTORS[m.group(2).lower()]
        if number != number.to_integral_value():
            raise TransformError(f"size {value!r} is not a whole number")
        return int(number)
    if transform == "parse-license":
        try:
            return parse_license_expression(normalize_license_case(value))
        except LicenseParseError as exc:
            raise TransformError(str(exc)) from None
    if transform == "to-presence":
        word = value.strip().lower()
        if word in _TRUE:
            return "yes"
        if word in _FALSE:
            return "no"
        raise TransformError(f"cannot read yes/no from {value!r}")
    raise TransformError(f"unknown transform {transform!r}")


def _hub_timestamp(text: str) -> datetime:
    try:
        when = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError:
        raise TransformError(f"cannot read a timestamp from {text!r}") from None
    if when.tzinfo is None:
        raise TransformError(f"timestamp {text!r} has no time zone")
    return when.astimezone(timezone.utc).replace(microsecond=0)


def _pair(item: str) -> tuple[str, str]:
    name, sep, rest = item.partition("=")
    if not sep or not name.strip():
        raise TransformError(f"expected name=value, got {item!r}")
    return name.strip(), rest.strip()


def _number_or_text(text: str) -> Decimal | str:
    try:
        number = Decimal(text)
    except InvalidOperation:
        return text
    return number if number.is_finite() else text


def to_target(desc: FieldDescriptor, value: Any) -> Any:
    """Shape a transformed hub value for ``desc`` and coerce it into the model type."""
    kind = desc.value_kind
    many = desc.cardinality == "zero-or-more"
    if kind == "mapping":
        value = dict(_pair(i) for i in _as_list(value))
    elif kind == "metric-list":
        value = [{"name": n, "value": _number_or_text(v)} for n, v in map(_pair, _as_list(value))]
    elif kind == "energy-list":
        value = [{"quantity": q} for q in _as_list(value)]
    elif many:
        value = _as_list(value) if isinstance(value, (str, tuple)) else [value]
    elif isinstance(value, tuple):
        if len(value) != 1:
            raise TransformError(f"{desc.name} takes one value, got {len(value)}")
        value = value[0]
    if kind == "timestamp" and isinstance(value, str):
        value = _hub_timestamp(value)
    if kind == "integer" and isinstance(value, str):
        if not value.strip().isdigit():
            raise TransformError(f"{value!r} is not a whole number")
        value = int(value)
    try:
        return _coerce_field(desc, value)
    except (ModelError, TypeError, ValueError) as exc:
        raise TransformError(str(exc)) from None


@dataclass(frozen=True)
class IngestionResult:
    document: Document
    notes: tuple[ProvenanceNote, ...]
    unmapped_keys: tuple[str, ...]
    findings: tuple[Finding, ...] = ()

    def __iter__(self):
        # allows ``doc, notes, unmapped = map_hub_record(...)``
        return iter((self.document, self.notes, self.unmapped_keys))


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.\-]+", "-", text).strip("-").lower() or "unnamed"


def map_hub_record(record: HubRecord, rules: IngestionRules | None = None) -> IngestionResult:
    rules = rules or default_ingestion_rules()
    by_key: dict[str, list[IngestionRule]] = {}
    for rule in rules.rules:
        by_key.setdefault(rule.hub_key, []).append(rule)

    ai_values: dict[str, tuple[FieldDescriptor, Any]] = {}
    ds_values: dict[str, tuple[FieldDescriptor, Any]] = {}
    findings: list[Finding] = []
    unmapped: list[str] = []
    for key, raw in record.entries.items():
        matched = by_key.get(key)
        if not matched:
            unmapped.append(key)
            continue
        ok = False
        for rule in matched:
            try:
                transformed = apply_transform(rule.transform, raw)
                if rule.target_profile == "dataset" and rule.target.name == "name":
                    # one stub per declared dataset name
                    value = tuple(dict.fromkeys(to_target(rule.target, v) for v in _as_list(transformed)))
                else:
                    value = to_target(rule.target, transformed)
            except TransformError as exc:
                findings.append(
                    finding("TRANSFORM-FAILED", f"hub::{key}",
                            f"{rule.transform} into {rule.target_profile}/{rule.target.name} failed: {exc}")
                )
                continue
            if not is_populated(value):
                continue
            target = ai_values if rule.target_profile == "ai" else ds_values
            target[rule.target.name] = (rule.target, value)
            ok = True
        if not ok:
            unmapped.append(key)

    source = record.source
    model_id = source
    stamp = format_timestamp(record.retrieved_at)
    notes: list[ProvenanceNote] = []

    def build(cls: type, element_id: str, values: dict[str, tuple[FieldDescriptor, Any]]) -> BasePackage:
        provenance = {}
        for name in values:
            notes.append(ProvenanceNote(field_path(element_id, name), Origin.HUB_AUTOMATED, source, record.retrieved_at))
            provenance[name] = {"origin": Origin.HUB_AUTOMATED.value, "source": source, "retrievedAt": stamp}
        kwargs = {desc.attr: value for desc, value in values.values()}
        return cls(id=element_id, extensions={"provenance": provenance} if provenance else {}, **kwargs)

    elements: list[Any] = [
        Agent(id=INGEST_AGENT_ID, name="aibom hub ingestion", kind=AgentKind.SOFTWARE_AGENT)
    ]
    relationships = []
    if ai_values or ds_values:
        elements.append(build(AiPackage, model_id, ai_values))
    if ds_values:
        names = ds_values.pop("name", None)
        dataset_names = list(names[1]) if names else [None]
        stub_ids = []
        for ds_name in dataset_names:
            stub_id = f"{source}#dataset-{_slug(ds_name)}" if ds_name else f"{source}#dataset"
            # distinct names can share a slug; number the later ones
            base_id, n = stub_id, 2
            while stub_id in stub_ids:
                stub_id, n = f"{base_id}-{n}", n + 1
            values = dict(ds_values)
            if ds_name:
                values["name"] = (default_catalog().get("base", "name"), ds_name)
            elements.append(build(DatasetPackage, stub_id, values))
            stub_ids.append(stub_id)
        relationships.append(Relationship(from_=model_id, type=RelationshipType.TRAINED_ON, to=stub_ids))

    doc = Document(
        CreationInfo(record.retrieved_at, (INGEST_AGENT_ID,)),
        tuple(elements),
        tuple(relationships),
        {"hubSource": source},
    )
    return IngestionResult(doc, tuple(sorted(notes)), tuple(unmapped), tuple(sort_findings(findings)))


def automation_counts(partial: Document, profile: str = "ai") -> tuple[int, int]:
    """``(populated, total)`` over the profile's descriptive fields plus base.

    A field counts when any package of the profile populates it; identity
    fields are left out of both sides.
    """
    if profile not in ("ai", "dataset"):
        raise ValueError(f"profile must be 'ai' or 'dataset', got {profile!r}")
    cls = AiPackage if profile == "ai" else DatasetPackage
    packages = partial.packages(cls)
    if not packages:
        raise ValueError(f"document has no {cls.__name__} to measure")
    fields = [d for d in cls.descriptors() if d.name not in IDENTITY_FIELDS]
    populated = sum(1 for d in fields if any(is_populated(p.value(d.name)) for p in packages))
    return populated, len(fields)


def automation_rate(partial: Document, profile: str = "ai") -> Fraction:
    return Fraction(*automation_counts(partial, profile))
