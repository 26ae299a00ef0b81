"""Hypothesis strategies producing valid documents.

Packages draw a random subset of their fields rather than every field, which
keeps generation fast enough for four-digit example counts.
"""

from __future__ import annotations

from datetime import datetime, timezone

from hypothesis import strategies as st

from aibom.licenses import And, LicenseId, LicenseRef, Or, With
from aibom.model import (
    Agent,
    AgentKind,
    AiPackage,
    BasePackage,
    Completeness,
    ConfidentialityLevel,
    CreationInfo,
    DatasetAvailability,
    DatasetPackage,
    DatasetType,
    Document,
    EnergyQuantity,
    MetricEntry,
    Presence,
    PrimaryPurpose,
    Relationship,
    RelationshipType,
    SafetyRiskAssessment,
)

ids = st.text(min_size=1, max_size=10).filter(lambda s: not any(c.isspace() for c in s))
any_text = st.text(max_size=16)
list_item = st.text(min_size=1, max_size=12).filter(lambda s: s.strip())
timestamps = st.datetimes(
    min_value=datetime(1970, 1, 1), max_value=datetime(2100, 1, 1), timezones=st.just(timezone.utc)
).map(lambda d: d.replace(microsecond=0))
decimals = st.decimals(allow_nan=False, allow_infinity=False)
nonneg = st.decimals(min_value=0, allow_nan=False, allow_infinity=False)

license_ids = st.builds(LicenseId, st.sampled_from(["MIT", "Apache-2.0", "GPL-2.0-only", "NotAList-9"]), st.booleans())
license_leaf = st.one_of(
    license_ids,
    st.builds(LicenseRef, st.sampled_from(["LicenseRef-acme", "DocumentRef-x:LicenseRef-y"])),
    st.builds(With, license_ids, st.sampled_from(["Classpath-exception-2.0", "LLVM-exception"])),
)


@st.composite
def licenses(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(license_leaf)
    op = draw(st.sampled_from([And, Or]))
    return op(draw(licenses(depth - 1)), draw(licenses(depth - 1)))


@st.composite
def extension_values(draw, depth=2):
    shape = draw(st.sampled_from(["text", "list", "map"])) if depth else "text"
    if shape == "text":
        return draw(any_text)
    n = draw(st.integers(min_value=0, max_value=2))
    if shape == "list":
        return [draw(extension_values(depth - 1)) for _ in range(n)]
    return {draw(any_text): draw(extension_values(depth - 1)) for _ in range(n)}


extensions = st.dictionaries(any_text, extension_values(), max_size=2)
maybe_extensions = st.one_of(st.just({}), extensions)


def unique_list(item, max_size=3):
    return st.lists(item, max_size=max_size, unique=True)


text_list = unique_list(list_item)
energy_list = unique_list(st.builds(EnergyQuantity, nonneg), 2)
metrics = st.lists(
    st.builds(MetricEntry, list_item, st.one_of(decimals, any_text), st.one_of(st.none(), decimals)),
    max_size=3,
    unique_by=lambda m: m.name,
)
mappings = st.dictionaries(list_item, any_text, max_size=3)

BASE = {
    "name": any_text,
    "package_version": any_text,
    "download_location": st.sampled_from(["NOASSERTION", "https://example.com/x", "urn:x:y"]),
    "declared_license": licenses(),
    "concluded_license": licenses(),
    "comment": any_text,
}
AI = {
    "autonomy_type": st.sampled_from(Presence),
    "domain": text_list,
    "energy_consumption": energy_list,
    "finetuning_energy_consumption": energy_list,
    "hyperparameter": mappings,
    "inference_energy_consumption": energy_list,
    "information_about_application": any_text,
    "information_about_training": any_text,
    "known_bias": text_list,
    "limitation": any_text,
    "metric": metrics,
    "metric_decision_threshold": metrics,
    "model_data_preprocessing": text_list,
    "model_explainability": text_list,
    "safety_risk_assessment": st.sampled_from(SafetyRiskAssessment),
    "standard_compliance": text_list,
    "training_energy_consumption": energy_list,
    "type_of_model": text_list,
    "use_sensitive_personal_information": st.sampled_from(Presence),
}
DATASET = {
    "anonymization_method_used": text_list,
    "confidentiality_level": st.sampled_from(ConfidentialityLevel),
    "data_collection_process": any_text,
    "data_preprocessing": text_list,
    "dataset_availability": st.sampled_from(DatasetAvailability),
    "dataset_noise": any_text,
    "dataset_size": st.integers(min_value=0, max_value=10**15),
    "dataset_type": unique_list(st.sampled_from(DatasetType)),
    "dataset_update_mechanism": any_text,
    "has_sensitive_personal_information": st.sampled_from(Presence),
    "intended_use": any_text,
    "known_bias": text_list,
    "sensor": mappings,
}
KINDS = {
    "base": (BasePackage, {}, None),
    "ai": (AiPackage, AI, PrimaryPurpose.AI_MODEL),
    "dataset": (DatasetPackage, DATASET, PrimaryPurpose.DATASET),
}


@st.composite
def packages(draw, element_id, agent_ids, kind):
    cls, profile_fields, purpose = KINDS[kind]
    menu = {**BASE, **profile_fields}
    chosen = draw(st.sets(st.sampled_from(sorted(menu)), max_size=len(menu)))
    values = {name: draw(menu[name]) for name in sorted(chosen)}
    built, release = sorted([draw(timestamps), draw(timestamps)])
    if draw(st.booleans()):
        values["built_time"] = built
    if draw(st.booleans()):
        values["release_time"] = release
    values["originated_by"] = draw(unique_list(st.sampled_from(agent_ids), min(2, len(agent_ids))))
    if draw(st.booleans()):
        values["supplied_by"] = draw(st.sampled_from(agent_ids))
    if draw(st.booleans()):
        values["primary_purpose"] = purpose or draw(st.sampled_from(PrimaryPurpose))
    return cls(id=element_id, extensions=draw(maybe_extensions), **values)


@st.composite
def documents(draw):
    """A valid document plus its elements and relationships in generation order."""
    all_ids = draw(st.lists(ids, min_size=2, max_size=5, unique=True))
    n_agents = draw(st.integers(min_value=1, max_value=len(all_ids) - 1))
    agent_ids, package_ids = all_ids[:n_agents], all_ids[n_agents:]
    elements = [
        Agent(id=a, name=draw(list_item), kind=draw(st.sampled_from(AgentKind)), extensions=draw(maybe_extensions))
        for a in agent_ids
    ]
    for pid in package_ids:
        elements.append(draw(packages(pid, agent_ids, draw(st.sampled_from(sorted(KINDS))))))
    relationships = []
    ordered = sorted(all_ids)
    for _ in range(draw(st.integers(min_value=0, max_value=3))):
        rel_type = draw(st.sampled_from(RelationshipType))
        if rel_type is RelationshipType.CONTAINS:
            # contains edges only point forward in id order, so the subgraph stays acyclic
            i = draw(st.integers(min_value=0, max_value=len(ordered) - 2))
            source = ordered[i]
            targets = draw(st.lists(st.sampled_from(ordered[i + 1:]), min_size=1, max_size=2, unique=True))
        else:
            source = draw(st.sampled_from(all_ids))
            targets = draw(st.lists(st.sampled_from(all_ids), min_size=1, max_size=2, unique=True))
        relationships.append(
            Relationship(
                from_=source,
                type=rel_type,
                to=targets,
                completeness=draw(st.sampled_from(Completeness)),
                extensions=draw(maybe_extensions),
            )
        )
    creators = draw(st.lists(st.sampled_from(agent_ids), min_size=1, max_size=min(2, len(agent_ids)), unique=True))
    info = CreationInfo(draw(timestamps), creators)
    doc = Document(info, tuple(elements), tuple(relationships), draw(maybe_extensions))
    return doc, elements, relationships
