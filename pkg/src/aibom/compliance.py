"""Regulation coverage matrices and model-card generation.

Both matrices and model-card mappings are data files; the shipped ones live in
``aibom/data`` and any file in the same format can be passed instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

from aibom.catalog import CatalogError, FieldDescriptor, default_catalog
from aibom.findings import field_path
from aibom.licenses import render_license_expression
from aibom.model import (
    Agent,
    AiPackage,
    BasePackage,
    DatasetPackage,
    Document,
    RelationshipType,
    format_decimal,
    format_timestamp,
    is_populated,
)
from aibom.serialization import ReadError, parse_raw, raw_to_plain

BUILTIN_MATRICES = ("eu-ai-act", "medical-devices", "ieee-7000")
TRANSFORMS = ("verbatim", "join-list", "render-metric-table", "render-energy-table")


class MappingError(ValueError):
    """A matrix or model-card mapping file is invalid."""


class ModelLookupError(LookupError):
    pass


def _load_tree(data: bytes | str, what: str) -> Any:
    try:
        return raw_to_plain(parse_raw(data))
    except ReadError as exc:
        raise MappingError(f"{what}: {exc}") from None


def _flag(value: Any, what: str) -> bool:
    text = str(value).strip().lower()
    if text in ("true", "yes"):
        return True
    if text in ("false", "no"):
        return False
    raise MappingError(f"{what} must be true or false, got {value!r}")


def _text(entry: dict, key: str, what: str, default: Optional[str] = None) -> str:
    value = entry.get(key, default)
    if not isinstance(value, str) or (default is None and not value):
        raise MappingError(f"{what}: {key!r} must be non-empty text")
    return value


def _field_refs(raw: Any, what: str) -> tuple[FieldDescriptor, ...]:
    if raw in ("", None):
        return ()
    if not isinstance(raw, tuple):
        raise MappingError(f"{what}: fields must be a list of profile/field references")
    catalog = default_catalog()
    out = []
    for ref in raw:
        try:
            desc = catalog.resolve_ref(ref)
        except CatalogError as exc:
            raise MappingError(f"{what}: {exc}") from None
        if desc.name == "spdxId":
            raise MappingError(f"{what}: spdxId is an identity field and cannot be mapped")
        out.append(FieldRef(ref.partition("/")[0], desc))
    return tuple(out)


@dataclass(frozen=True)
class FieldRef:
    """A catalog field as seen from one profile (``ai/name`` is the name of an AI package)."""

    profile: str
    field: FieldDescriptor

    @property
    def name(self) -> str:
        return self.field.name

    def __str__(self) -> str:
        return f"{self.profile}/{self.field.name}"


@dataclass(frozen=True)
class Obligation:
    id: str
    category: str
    description: str
    mapped_fields: tuple[FieldRef, ...]
    mappable: bool = True

    def __post_init__(self) -> None:
        if self.mappable and not self.mapped_fields:
            raise MappingError(f"obligation {self.id!r} is mappable but maps no fields")
        if not self.mappable and self.mapped_fields:
            raise MappingError(f"obligation {self.id!r} is unmappable but maps fields")


@dataclass(frozen=True)
class CoverageMatrix:
    regulation: str
    version: str
    obligations: tuple[Obligation, ...]

    def __post_init__(self) -> None:
        seen = set()
        for ob in self.obligations:
            if ob.id in seen:
                raise MappingError(f"duplicate obligation id {ob.id!r}")
            seen.add(ob.id)

    def categories(self) -> list[str]:
        return list(dict.fromkeys(ob.category for ob in self.obligations))


def load_matrix(data: bytes | str) -> CoverageMatrix:
    tree = _load_tree(data, "matrix")
    if not isinstance(tree, dict):
        raise MappingError("matrix must be a mapping")
    regulation = _text(tree, "regulation", "matrix")
    version = _text(tree, "version", "matrix")
    raw = tree.get("obligations")
    if not isinstance(raw, tuple) or not raw:
        raise MappingError("matrix needs a non-empty 'obligations' list")
    obligations = []
    for n, entry in enumerate(raw):
        what = f"obligation #{n + 1}"
        if not isinstance(entry, dict):
            raise MappingError(f"{what} must be a mapping")
        unknown = set(entry) - {"id", "category", "description", "mappable", "fields"}
        if unknown:
            raise MappingError(f"{what}: unknown key(s) {', '.join(sorted(unknown))}")
        ob_id = _text(entry, "id", what)
        obligations.append(
            Obligation(
                id=ob_id,
                category=_text(entry, "category", ob_id),
                description=_text(entry, "description", ob_id, default=""),
                mapped_fields=_field_refs(entry.get("fields"), ob_id),
                mappable=_flag(entry.get("mappable", "true"), f"{ob_id}: mappable"),
            )
        )
    return CoverageMatrix(regulation, version, tuple(obligations))


@lru_cache(maxsize=None)
def builtin_matrix(name: str) -> CoverageMatrix:
    if name not in BUILTIN_MATRICES:
        raise MappingError(f"no built-in matrix {name!r} (choose from {', '.join(BUILTIN_MATRICES)})")
    return load_matrix(resources.files("aibom").joinpath(f"data/matrices/{name}.yaml").read_bytes())


class Status(str, Enum):
    MISSING = "missing"
    PARTIAL = "partial"
    SATISFIED = "satisfied"
    UNMAPPABLE = "unmappable"


#: ordering used by the monotonicity property
STATUS_RANK = {Status.MISSING: 0, Status.PARTIAL: 1, Status.SATISFIED: 2}


@dataclass(frozen=True)
class ObligationResult:
    obligation_id: str
    status: Status
    evidence: tuple[str, ...]


@dataclass(frozen=True)
class CoverageReport:
    regulation: str
    per_obligation: tuple[ObligationResult, ...]

    @property
    def satisfied(self) -> int:
        return self.count(Status.SATISFIED)

    @property
    def total(self) -> int:
        return len(self.per_obligation)

    def count(self, status: Status) -> int:
        return sum(1 for r in self.per_obligation if r.status is status)

    def status_of(self, obligation_id: str) -> Status:
        for r in self.per_obligation:
            if r.obligation_id == obligation_id:
                return r.status
        raise KeyError(obligation_id)

    @property
    def summary(self) -> str:
        return f"{self.satisfied}/{self.total}"


def _carriers(doc: Document, profile: str) -> list[BasePackage]:
    return [p for p in doc.packages() if profile in p.PROFILES]


def coverage_report(doc: Document, matrix: CoverageMatrix) -> CoverageReport:
    """Status of every obligation; only fully populated obligations count as satisfied."""
    results = []
    for ob in matrix.obligations:
        if not ob.mappable:
            results.append(ObligationResult(ob.id, Status.UNMAPPABLE, ()))
            continue
        evidence: list[str] = []
        hit = 0
        for ref in ob.mapped_fields:
            paths = [
                field_path(p.id, ref.name) for p in _carriers(doc, ref.profile) if is_populated(p.value(ref.name))
            ]
            if paths:
                hit += 1
                evidence.extend(paths)
        if hit == len(ob.mapped_fields):
            status = Status.SATISFIED
        elif hit:
            status = Status.PARTIAL
        else:
            status = Status.MISSING
        results.append(ObligationResult(ob.id, status, tuple(sorted(set(evidence)))))
    return CoverageReport(matrix.regulation, tuple(results))


# -- model cards -----------------------------------------------------------


@dataclass(frozen=True)
class CardSection:
    name: str
    sources: tuple[FieldRef, ...]
    transform: str = "verbatim"

    def __post_init__(self) -> None:
        if not self.sources:
            raise MappingError(f"section {self.name!r} has no sources")
        if self.transform not in TRANSFORMS:
            raise MappingError(f"section {self.name!r}: unknown transform {self.transform!r}")
        for ref in self.sources:
            if ref.profile == "dataset" and ref.field.profile not in ("dataset", "base"):
                raise MappingError(f"section {self.name!r}: {ref} is not a dataset field")


@dataclass(frozen=True)
class ModelCardMapping:
    sections: tuple[CardSection, ...]

    def __post_init__(self) -> None:
        names = [s.name for s in self.sections]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise MappingError(f"duplicate section name(s): {', '.join(dupes)}")


def load_modelcard_mapping(data: bytes | str) -> ModelCardMapping:
    tree = _load_tree(data, "model-card mapping")
    if not isinstance(tree, dict) or "sections" not in tree:
        raise MappingError("model-card mapping needs a 'sections' list")
    raw = tree["sections"]
    if raw == "":
        raw = ()
    if not isinstance(raw, tuple):
        raise MappingError("'sections' must be a list")
    sections = []
    for n, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise MappingError(f"section #{n + 1} must be a mapping")
        name = _text(entry, "section", f"section #{n + 1}")
        sections.append(
            CardSection(name, _field_refs(entry.get("sources"), name), _text(entry, "transform", name, "verbatim"))
        )
    return ModelCardMapping(tuple(sections))


@lru_cache(maxsize=None)
def default_modelcard_mapping() -> ModelCardMapping:
    return load_modelcard_mapping(resources.files("aibom").joinpath("data/modelcard-default.yaml").read_bytes())


def _model(doc: Document, model_id: str) -> AiPackage:
    element = doc.index.get(model_id)
    if element is None:
        raise ModelLookupError(f"model {model_id!r} not found in document")
    if not isinstance(element, AiPackage):
        raise ModelLookupError(f"{model_id!r} is a {type(element).__name__}, not an AiPackage")
    return element


def training_datasets(doc: Document, model: AiPackage) -> list[DatasetPackage]:
    ids = []
    for rel in doc.relationships:
        if rel.from_ == model.id and rel.type is RelationshipType.TRAINED_ON:
            ids.extend(rel.to)
    found = [doc.index.get(i) for i in sorted(set(ids))]
    return [d for d in found if isinstance(d, DatasetPackage)]


def _sources(doc: Document, model: AiPackage, datasets: list[DatasetPackage], ref: FieldRef) -> list[tuple[BasePackage, Any]]:
    owners: list[BasePackage] = list(datasets) if ref.profile == "dataset" else [model]
    return [(o, o.value(ref.name)) for o in owners if is_populated(o.value(ref.name))]


def _section_populated(doc, model, datasets, section: CardSection) -> bool:
    return any(_sources(doc, model, datasets, ref) for ref in section.sources)


def extraction_rate(doc: Document, model_id: str, mapping: ModelCardMapping) -> Fraction:
    """Share of mapping sections the document can fill for ``model_id``."""
    if not mapping.sections:
        raise MappingError("mapping has no sections; extraction rate is undefined")
    model = _model(doc, model_id)
    datasets = training_datasets(doc, model)
    populated = sum(1 for s in mapping.sections if _section_populated(doc, model, datasets, s))
    return Fraction(populated, len(mapping.sections))


def _label(doc: Document, ref: str) -> str:
    element = doc.index.get(ref)
    if isinstance(element, Agent):
        return element.name
    return ref


def _atom(value: Any) -> str:
    if isinstance(value, Enum):
        return value.value
    if hasattr(value, "isoformat"):
        return format_timestamp(value)
    if isinstance(value, (str, int)):
        return str(value)
    if isinstance(value, Decimal):
        return format_decimal(value)
    return render_license_expression(value)


def _items(doc: Document, desc: FieldDescriptor, value: Any) -> list[str]:
    if desc.value_kind == "mapping":
        return [f"{k}: {v}" for k, v in value]
    if desc.name in ("originatedBy", "suppliedBy"):
        refs = value if isinstance(value, tuple) else (value,)
        return [_label(doc, r) for r in refs]
    if isinstance(value, tuple):
        return [_atom(v) for v in value]
    return [_atom(value)]


def _metric_table(entries: list[tuple[BasePackage, Any]], thresholds: dict[str, Any]) -> list[str]:
    lines = ["| Metric | Value | Decision threshold |", "| --- | --- | --- |"]
    for _, metrics in entries:
        for m in metrics:
            threshold = m.decision_threshold if m.decision_threshold is not None else thresholds.get(m.name)
            shown = "" if threshold is None else _atom(threshold)
            lines.append(f"| {m.name} | {_atom(m.value)} | {shown} |")
    return lines


_PHASES = {
    "energyConsumption": "unspecified",
    "trainingEnergyConsumption": "training",
    "finetuningEnergyConsumption": "fine-tuning",
    "inferenceEnergyConsumption": "inference",
}


def _render_section(doc, model, datasets, section: CardSection) -> list[str]:
    if section.transform == "render-metric-table":
        metric_sources = []
        thresholds: dict[str, Any] = {}
        for ref in section.sources:
            for owner, value in _sources(doc, model, datasets, ref):
                if ref.name == "metricDecisionThreshold":
                    thresholds.update({m.name: m.value for m in value})
                elif ref.field.value_kind == "metric-list":
                    metric_sources.append((owner, value))
        if not metric_sources:
            return ["| Metric | Value | Decision threshold |", "| --- | --- | --- |"] + [
                f"| {name} |  | {_atom(v)} |" for name, v in sorted(thresholds.items())
            ]
        return _metric_table(metric_sources, thresholds)
    if section.transform == "render-energy-table":
        lines = ["| Phase | Quantity | Unit |", "| --- | --- | --- |"]
        for ref in section.sources:
            for _, value in _sources(doc, model, datasets, ref):
                for q in value:
                    lines.append(f"| {_PHASES.get(ref.name, ref.name)} | {format_decimal(q.quantity)} | {q.unit} |")
        return lines
    parts: list[str] = []
    lines: list[str] = []
    for ref in section.sources:
        for owner, value in _sources(doc, model, datasets, ref):
            items = _items(doc, ref.field, value)
            if section.transform == "join-list":
                parts.extend(items)
                continue
            if len(section.sources) == 1 and ref.profile != "dataset":
                lines.extend(items if len(items) == 1 else [f"- {i}" for i in items])
                continue
            prefix = f"{owner.name or owner.id} " if ref.profile == "dataset" else ""
            if len(items) == 1 and "\n" not in items[0]:
                lines.append(f"- {prefix}{ref.name}: {items[0]}")
            else:
                lines.append(f"- {prefix}{ref.name}:")
                lines.extend(f"  - {i}" for i in items)
    if section.transform == "join-list":
        return [", ".join(dict.fromkeys(parts))]
    return lines


@dataclass(frozen=True)
class ModelCard:
    text: str
    populated_sections: tuple[str, ...]
    total_sections: int

    @property
    def rate(self) -> Fraction:
        return Fraction(len(self.populated_sections), self.total_sections)


def generate_model_card(doc: Document, model_id: str, mapping: ModelCardMapping | None = None) -> ModelCard:
    """Render a Markdown model card; sections without content are left out."""
    mapping = mapping or default_modelcard_mapping()
    if not mapping.sections:
        raise MappingError("mapping has no sections")
    model = _model(doc, model_id)
    datasets = training_datasets(doc, model)
    out = [f"# Model Card: {model.name or model.id}"]
    populated = []
    for section in mapping.sections:
        if not _section_populated(doc, model, datasets, section):
            continue
        populated.append(section.name)
        out.append("")
        out.append(f"## {section.name}")
        out.append("")
        out.extend(_render_section(doc, model, datasets, section))
    text = "\n".join(out) + "\n"
    return ModelCard(text, tuple(populated), len(mapping.sections))
