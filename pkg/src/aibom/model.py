"""Element graph for AI bills of materials.

Elements are immutable dataclasses. Package fields are declared once here and
described by the field catalog; ``__post_init__`` coerces loosely typed input
(strings, lists, dicts) into the canonical immutable representation so that
two equal documents compare equal no matter how they were built.
"""

from __future__ import annotations

import dataclasses
import heapq
import re
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from functools import cached_property
from typing import Any, ClassVar, Iterator, Mapping, Optional, Union

from aibom.catalog import FieldDescriptor, default_catalog, energy_units
from aibom.findings import Finding, field_path, finding, sort_findings
from aibom.licenses import LicenseExpression, LicenseId, LicenseRef, With, And, Or, parse_license_expression

NOASSERTION = "NOASSERTION"

_SPEC_VERSION = re.compile(r"^\d+\.\d+\.\d+$")
_URI = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:\S+$")
_TIMESTAMP = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


class ModelError(ValueError):
    """A value violates a core-model invariant."""


class ConflictError(ModelError):
    """An element id is already present in the document."""


class Presence(str, Enum):
    YES = "yes"
    NO = "no"
    NO_ASSERTION = "no-assertion"


class PrimaryPurpose(str, Enum):
    AI_MODEL = "ai-model"
    DATASET = "dataset"
    APPLICATION = "application"
    LIBRARY = "library"
    OTHER = "other"


class SafetyRiskAssessment(str, Enum):
    SERIOUS = "serious"
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    NO_ASSERTION = "no-assertion"


class ConfidentialityLevel(str, Enum):
    RED = "red"
    AMBER = "amber"
    GREEN = "green"
    CLEAR = "clear"
    NO_ASSERTION = "no-assertion"


class DatasetAvailability(str, Enum):
    DIRECT_DOWNLOAD = "direct-download"
    QUERY_ONLY = "query-only"
    REGISTRATION_REQUIRED = "registration-required"
    SCRAPING_SCRIPT = "scraping-script"
    CLICKTHROUGH = "clickthrough"
    NO_ASSERTION = "no-assertion"


class DatasetType(str, Enum):
    IMAGE = "image"
    TEXT = "text"
    AUDIO = "audio"
    VIDEO = "video"
    TABULAR = "tabular"
    SENSOR_STREAM = "sensor-stream"
    OTHER = "other"


class AgentKind(str, Enum):
    PERSON = "person"
    ORGANIZATION = "organization"
    SOFTWARE_AGENT = "software-agent"


class RelationshipType(str, Enum):
    CONTAINS = "contains"
    TRAINED_ON = "trained-on"
    TESTED_ON = "tested-on"
    FINE_TUNED_FROM = "fine-tuned-from"
    HAS_DOCUMENTATION = "has-documentation"
    OTHER = "other"


class Completeness(str, Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    NO_ASSERTION = "no-assertion"


#: enum-valued catalog fields and the enum each one draws from
ENUM_FIELDS: dict[str, type[Enum]] = {
    "primaryPurpose": PrimaryPurpose,
    "safetyRiskAssessment": SafetyRiskAssessment,
    "confidentialityLevel": ConfidentialityLevel,
    "datasetAvailability": DatasetAvailability,
    "datasetType": DatasetType,
}


def coerce_enum(enum_type: type[Enum], value: Any) -> Enum:
    if isinstance(value, enum_type):
        return value
    if value == NOASSERTION and "no-assertion" in enum_type._value2member_map_:
        return enum_type("no-assertion")
    try:
        return enum_type(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_type)
        raise ModelError(f"{value!r} is not one of: {allowed}") from None


def check_element_id(value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise ModelError("element id must be a non-empty string")
    if any(ch.isspace() for ch in value):
        raise ModelError(f"element id {value!r} contains whitespace")
    return value


def parse_timestamp(value: Any) -> datetime:
    """Accept only the canonical ``YYYY-MM-DDTHH:MM:SSZ`` form (or an aware UTC datetime)."""
    if isinstance(value, datetime):
        if value.tzinfo is None or value.utcoffset() != timezone.utc.utcoffset(None):
            raise ModelError("timestamps must be timezone-aware UTC")
        return value.replace(microsecond=0, tzinfo=timezone.utc)
    if not isinstance(value, str) or not _TIMESTAMP.match(value):
        raise ModelError(f"timestamp {value!r} is not in the form YYYY-MM-DDTHH:MM:SSZ")
    try:
        return datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise ModelError(f"invalid timestamp {value!r}: {exc}") from None


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_decimal(value: Any) -> Decimal:
    if isinstance(value, bool):
        raise ModelError("booleans are not numbers")
    try:
        number = value if isinstance(value, Decimal) else Decimal(str(value))
    except InvalidOperation:
        raise ModelError(f"{value!r} is not a decimal number") from None
    if not number.is_finite():
        raise ModelError(f"{value!r} is not a finite number")
    return number


def format_decimal(value: Decimal) -> str:
    """Shortest plain (non-exponent) text for ``value``; exact at any precision."""
    if value == 0:
        return "0"
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


@dataclass(frozen=True)
class EnergyQuantity:
    quantity: Decimal
    unit: str = "kilowatt-hour"

    def __post_init__(self) -> None:
        quantity = to_decimal(self.quantity)
        if quantity < 0:
            raise ModelError("energy quantity must be non-negative")
        if self.unit not in energy_units():
            raise ModelError(f"unregistered energy unit {self.unit!r}")
        object.__setattr__(self, "quantity", quantity)


@dataclass(frozen=True)
class MetricEntry:
    name: str
    value: Union[Decimal, str]
    decision_threshold: Optional[Decimal] = None

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ModelError("metric name must be non-empty")
        if not isinstance(self.value, str):
            object.__setattr__(self, "value", to_decimal(self.value))
        if self.decision_threshold is not None:
            object.__setattr__(self, "decision_threshold", to_decimal(self.decision_threshold))


def freeze_extension(value: Any) -> Any:
    """Normalize an extension value tree: mappings sorted, sequences to tuples, scalars to text."""
    if isinstance(value, Mapping):
        return {str(k): freeze_extension(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, (list, tuple)):
        return tuple(freeze_extension(v) for v in value)
    if value is None:
        return ""
    return str(value)


def _ext_field():
    return field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class CreationInfo:
    created: datetime
    created_by: tuple[str, ...]
    spec_version: str = "3.0.0"

    def __post_init__(self) -> None:
        object.__setattr__(self, "created", parse_timestamp(self.created))
        if isinstance(self.created_by, str):
            raise ModelError("created_by must be a list of element ids")
        created_by = tuple(check_element_id(x) for x in self.created_by)
        if not created_by:
            raise ModelError("creation info needs at least one creator (empty creator list)")
        object.__setattr__(self, "created_by", created_by)
        if not isinstance(self.spec_version, str) or not _SPEC_VERSION.match(self.spec_version):
            raise ModelError(f"malformed spec version {self.spec_version!r} (expected MAJOR.MINOR.PATCH)")


@dataclass(frozen=True, kw_only=True)
class Agent:
    id: str
    name: str
    kind: AgentKind = AgentKind.ORGANIZATION
    extensions: dict = _ext_field()

    def __post_init__(self) -> None:
        check_element_id(self.id)
        if not isinstance(self.name, str) or not self.name.strip():
            raise ModelError("agent name must be non-empty")
        object.__setattr__(self, "kind", coerce_enum(AgentKind, self.kind))
        object.__setattr__(self, "extensions", freeze_extension(self.extensions))


def _coerce_field(desc: FieldDescriptor, value: Any) -> Any:
    kind = desc.value_kind
    many = desc.cardinality == "zero-or-more"
    if many:
        if value is None:
            value = ()
        if kind == "mapping":
            if isinstance(value, Mapping):
                pairs = list(value.items())
            else:
                pairs = [tuple(p) for p in value]
            keys = [k for k, _ in pairs]
            if len(set(keys)) != len(keys):
                raise ModelError("mapping keys must be unique")
            for k, v in pairs:
                if not isinstance(k, str) or not k or not isinstance(v, str):
                    raise ModelError("mapping keys and values must be text (keys non-empty)")
            return tuple(sorted(pairs))
        if isinstance(value, (str, bytes)) or not isinstance(value, (list, tuple)):
            raise ModelError(f"expected a list, got {type(value).__name__}")
        items = tuple(_coerce_item(desc, v) for v in value)
        if len(set(items)) != len(items):
            raise ModelError("list contains duplicate entries")
        if kind == "metric-list":
            names = [m.name for m in items]
            if len(set(names)) != len(names):
                raise ModelError("metric names must be unique")
        return items
    if value is None:
        return None
    return _coerce_item(desc, value)


def _coerce_item(desc: FieldDescriptor, value: Any) -> Any:
    kind = desc.value_kind
    if kind == "text":
        if not isinstance(value, str):
            raise ModelError(f"expected text, got {type(value).__name__}")
        return value
    if kind == "text-list":
        if not isinstance(value, str) or not value.strip():
            raise ModelError("list entries must be non-empty text")
        return value
    if kind == "uri":
        if not isinstance(value, str) or not (value == NOASSERTION or _URI.match(value)):
            raise ModelError(f"{value!r} is not a URI or NOASSERTION")
        return value
    if kind == "presence":
        return coerce_enum(Presence, value)
    if kind == "enum":
        return coerce_enum(ENUM_FIELDS[desc.name], value)
    if kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ModelError(f"expected an integer, got {value!r}")
        if value < 0:
            raise ModelError("value must be non-negative")
        return value
    if kind == "timestamp":
        return parse_timestamp(value)
    if kind == "license-expression":
        if isinstance(value, str):
            return parse_license_expression(value)
        if not isinstance(value, (LicenseId, LicenseRef, With, And, Or)):
            raise ModelError(f"expected a license expression, got {type(value).__name__}")
        return value
    if kind == "energy-list":
        if isinstance(value, EnergyQuantity):
            return value
        if isinstance(value, Mapping):
            return EnergyQuantity(**value)
        return EnergyQuantity(value)
    if kind == "metric-list":
        if isinstance(value, MetricEntry):
            return value
        if isinstance(value, Mapping):
            return MetricEntry(**value)
        raise ModelError(f"expected a metric entry, got {type(value).__name__}")
    raise ModelError(f"unsupported value kind {kind!r}")


@dataclass(frozen=True, kw_only=True)
class BasePackage:
    """A package with the fields every profile shares."""

    PROFILES: ClassVar[tuple[str, ...]] = ("base",)
    PURPOSE: ClassVar[Optional[PrimaryPurpose]] = None

    id: str
    name: Optional[str] = None
    package_version: Optional[str] = None
    primary_purpose: Optional[PrimaryPurpose] = None
    download_location: Optional[str] = None
    built_time: Optional[datetime] = None
    release_time: Optional[datetime] = None
    originated_by: tuple[str, ...] = ()
    supplied_by: Optional[str] = None
    declared_license: Optional[LicenseExpression] = None
    concluded_license: Optional[LicenseExpression] = None
    comment: Optional[str] = None
    extensions: dict = _ext_field()

    def __post_init__(self) -> None:
        check_element_id(self.id)
        for desc in self.descriptors():
            if desc.name == "spdxId":
                continue
            try:
                value = _coerce_field(desc, getattr(self, desc.attr))
            except ValueError as exc:
                raise ModelError(f"{self.id}: {desc.name}: {exc}") from None
            object.__setattr__(self, desc.attr, value)
        for ref in self.originated_by:
            check_element_id(ref)
        if self.supplied_by is not None:
            check_element_id(self.supplied_by)
        if self.PURPOSE is not None and self.primary_purpose not in (None, self.PURPOSE):
            raise ModelError(
                f"{self.id}: primaryPurpose must be {self.PURPOSE.value} for {type(self).__name__}"
            )
        object.__setattr__(self, "extensions", freeze_extension(self.extensions))

    @classmethod
    def descriptors(cls) -> list[FieldDescriptor]:
        return default_catalog().ordered(*cls.PROFILES)

    def value(self, field_name: str) -> Any:
        for desc in self.descriptors():
            if desc.name == field_name:
                return getattr(self, desc.attr)
        raise KeyError(field_name)


@dataclass(frozen=True, kw_only=True)
class AiPackage(BasePackage):
    PROFILES = ("base", "ai")
    PURPOSE = PrimaryPurpose.AI_MODEL

    autonomy_type: Optional[Presence] = None
    domain: tuple[str, ...] = ()
    energy_consumption: tuple[EnergyQuantity, ...] = ()
    finetuning_energy_consumption: tuple[EnergyQuantity, ...] = ()
    hyperparameter: tuple[tuple[str, str], ...] = ()
    inference_energy_consumption: tuple[EnergyQuantity, ...] = ()
    information_about_application: Optional[str] = None
    information_about_training: Optional[str] = None
    known_bias: tuple[str, ...] = ()
    limitation: Optional[str] = None
    metric: tuple[MetricEntry, ...] = ()
    metric_decision_threshold: tuple[MetricEntry, ...] = ()
    model_data_preprocessing: tuple[str, ...] = ()
    model_explainability: tuple[str, ...] = ()
    safety_risk_assessment: Optional[SafetyRiskAssessment] = None
    standard_compliance: tuple[str, ...] = ()
    training_energy_consumption: tuple[EnergyQuantity, ...] = ()
    type_of_model: tuple[str, ...] = ()
    use_sensitive_personal_information: Optional[Presence] = None


@dataclass(frozen=True, kw_only=True)
class DatasetPackage(BasePackage):
    PROFILES = ("base", "dataset")
    PURPOSE = PrimaryPurpose.DATASET

    anonymization_method_used: tuple[str, ...] = ()
    confidentiality_level: Optional[ConfidentialityLevel] = None
    data_collection_process: Optional[str] = None
    data_preprocessing: tuple[str, ...] = ()
    dataset_availability: Optional[DatasetAvailability] = None
    dataset_noise: Optional[str] = None
    dataset_size: Optional[int] = None
    dataset_type: tuple[DatasetType, ...] = ()
    dataset_update_mechanism: Optional[str] = None
    has_sensitive_personal_information: Optional[Presence] = None
    intended_use: Optional[str] = None
    known_bias: tuple[str, ...] = ()
    sensor: tuple[tuple[str, str], ...] = ()


Element = Union[Agent, BasePackage]

#: wire ``type`` names for element classes
ELEMENT_TYPES: dict[str, type] = {
    "Agent": Agent,
    "Package": BasePackage,
    "AiPackage": AiPackage,
    "DatasetPackage": DatasetPackage,
}


def type_name(element: Element) -> str:
    for name, cls in ELEMENT_TYPES.items():
        if type(element) is cls:
            return name
    raise TypeError(f"not an element: {element!r}")


@dataclass(frozen=True, kw_only=True)
class Relationship:
    from_: str
    type: RelationshipType
    to: tuple[str, ...]
    completeness: Completeness = Completeness.NO_ASSERTION
    extensions: dict = _ext_field()

    def __post_init__(self) -> None:
        check_element_id(self.from_)
        object.__setattr__(self, "type", coerce_enum(RelationshipType, self.type))
        if isinstance(self.to, str):
            raise ModelError("relationship 'to' must be a list of element ids")
        to = tuple(check_element_id(t) for t in self.to)
        if not to:
            raise ModelError("relationship needs at least one target")
        object.__setattr__(self, "to", to)
        object.__setattr__(self, "completeness", coerce_enum(Completeness, self.completeness))
        object.__setattr__(self, "extensions", freeze_extension(self.extensions))

    def sort_key(self) -> tuple:
        return (self.from_, self.type.value, self.to, self.completeness.value, repr(self.extensions))


@dataclass(frozen=True)
class Document:
    """An element graph plus creation metadata.

    Elements are kept sorted by id and relationships in a canonical order, so
    insertion order never affects equality or serialization.
    """

    creation_info: CreationInfo
    elements: tuple[Element, ...] = ()
    relationships: tuple[Relationship, ...] = ()
    extensions: dict = _ext_field()

    def __post_init__(self) -> None:
        elements = tuple(sorted(self.elements, key=lambda e: e.id))
        for a, b in zip(elements, elements[1:]):
            if a.id == b.id:
                raise ConflictError(f"duplicate element id {a.id!r}")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(
            self, "relationships", tuple(sorted(self.relationships, key=Relationship.sort_key))
        )
        object.__setattr__(self, "extensions", freeze_extension(self.extensions))

    @cached_property
    def index(self) -> dict[str, Element]:
        return {e.id: e for e in self.elements}

    def packages(self, cls: type = BasePackage) -> list[BasePackage]:
        return [e for e in self.elements if isinstance(e, cls)]


def new_document(creation_info: CreationInfo) -> Document:
    """An empty document shell; add at least one element before writing it."""
    if not isinstance(creation_info, CreationInfo):
        raise ModelError("new_document needs a CreationInfo")
    return Document(creation_info)


def add_element(doc: Document, element: Element) -> Document:
    if not isinstance(element, (Agent, BasePackage)):
        raise TypeError(f"not an element: {element!r}")
    if element.id in doc.index:
        raise ConflictError(f"element id {element.id!r} already present")
    return dataclasses.replace(doc, elements=doc.elements + (element,))


def add_relationship(doc: Document, relationship: Relationship) -> Document:
    return dataclasses.replace(doc, relationships=doc.relationships + (relationship,))


def resolve_reference(doc: Document, element_id: str) -> Optional[Element]:
    """The element with exactly this id, or ``None``."""
    return doc.index.get(element_id)


@dataclass(frozen=True)
class ContainmentCycle:
    members: tuple[str, ...]


def containment_graph(doc: Document) -> Union[list[str], ContainmentCycle]:
    """Topological order of the ``contains`` subgraph, or the shortest cycle in it.

    Among valid orders the lexicographically least one is returned.
    """
    nodes = {e.id for e in doc.elements}
    succ: dict[str, set[str]] = {}
    for rel in doc.relationships:
        if rel.type is RelationshipType.CONTAINS:
            nodes.add(rel.from_)
            for t in rel.to:
                nodes.add(t)
                succ.setdefault(rel.from_, set()).add(t)
    indegree = dict.fromkeys(nodes, 0)
    for targets in succ.values():
        for t in targets:
            indegree[t] += 1
    heap = [n for n, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for t in succ.get(n, ()):
            indegree[t] -= 1
            if indegree[t] == 0:
                heapq.heappush(heap, t)
    if len(order) == len(nodes):
        return order
    return ContainmentCycle(_shortest_cycle(sorted(n for n, d in indegree.items() if d > 0), succ))


def _shortest_cycle(candidates: list[str], succ: dict[str, set[str]]) -> tuple[str, ...]:
    best: Optional[list[str]] = None
    for start in candidates:
        # BFS back to start; sorted expansion keeps ties deterministic
        parent: dict[str, Optional[str]] = {start: None}
        queue = deque([start])
        found = None
        while queue and found is None:
            n = queue.popleft()
            for t in sorted(succ.get(n, ())):
                if t == start:
                    found = n
                    break
                if t not in parent:
                    parent[t] = n
                    queue.append(t)
        if found is None:
            continue
        path = []
        node: Optional[str] = found
        while node is not None:
            path.append(node)
            node = parent[node]
        cycle = path[::-1]
        if best is None or (len(cycle), cycle) < (len(best), best):
            best = cycle
    assert best is not None
    return tuple(best)


def is_present(value: Any) -> bool:
    """Set at all (explicit no-assertion counts as present)."""
    if value is None:
        return False
    if isinstance(value, (tuple, list, dict)) and not value:
        return False
    return True


def is_populated(value: Any) -> bool:
    """Carries content: present and not an explicit no-assertion."""
    if not is_present(value):
        return False
    if value == NOASSERTION:
        return False
    if isinstance(value, Enum) and value.value == "no-assertion":
        return False
    if isinstance(value, str) and not value.strip():
        return False
    return True


def references(doc: Document) -> Iterator[tuple[str, str, Optional[type]]]:
    """Every element reference as ``(path, target id, required class or None)``."""
    for i, ref in enumerate(doc.creation_info.created_by):
        yield f"creationInfo::createdBy[{i}]", ref, Agent
    for pkg in doc.packages():
        for ref in pkg.originated_by:
            yield field_path(pkg.id, "originatedBy"), ref, Agent
        if pkg.supplied_by is not None:
            yield field_path(pkg.id, "suppliedBy"), pkg.supplied_by, Agent
    for n, rel in enumerate(doc.relationships):
        where = f"relationships[{n}]"
        yield f"{where}::from", rel.from_, None
        for ref in rel.to:
            yield f"{where}::to", ref, None


def core_violations(doc: Document) -> list[Finding]:
    """Document-level invariant violations (value-level ones are rejected at construction)."""
    out = []
    if not doc.elements:
        out.append(finding("DOC-EMPTY", "document", "a document needs at least one element"))
    for where, ref, required in references(doc):
        target = resolve_reference(doc, ref)
        if target is None:
            out.append(finding("REF-UNRESOLVED", where, f"reference {ref!r} does not resolve"))
        elif required is not None and not isinstance(target, required):
            out.append(
                finding("REF-TYPE", where, f"{ref!r} must be an {required.__name__}, got {type_name(target)}")
            )
    for pkg in doc.packages():
        if pkg.built_time and pkg.release_time and pkg.built_time > pkg.release_time:
            out.append(
                finding("TIME-ORDER", field_path(pkg.id, "builtTime"), "builtTime must not be later than releaseTime")
            )
    graph = containment_graph(doc)
    if isinstance(graph, ContainmentCycle):
        out.append(
            finding("CYCLE", "relationships", "contains cycle: " + " -> ".join(graph.members + graph.members[:1]))
        )
    return sort_findings(out)
