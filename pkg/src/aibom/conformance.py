"""Conformance policies and document validation."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable

from aibom.catalog import PROFILES, CatalogError, default_catalog
from aibom.findings import Finding, Severity, field_path, finding, sort_findings
from aibom.licenses import validate_license_ids
from aibom.model import (
    AiPackage,
    BasePackage,
    DatasetPackage,
    Document,
    Presence,
    RelationshipType,
    core_violations,
    is_populated,
    is_present,
)

CROSS_RULES = ("SENSITIVE-NO-ANON", "REL-TYPE", "THRESHOLD-ORPHAN")
_SWITCH = {"on": True, "off": False}


class PolicyError(ValueError):
    pass


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass(frozen=True)
class ConformancePolicy:
    name: str
    required_fields: dict[str, frozenset[str]]
    cross_rules: tuple[str, ...] = CROSS_RULES

    def __post_init__(self) -> None:
        if not self.name:
            raise PolicyError("policy name must be non-empty")
        catalog = default_catalog()
        required = {}
        for profile in PROFILES:
            names = frozenset(self.required_fields.get(profile, ()))
            for name in sorted(names):
                try:
                    catalog.resolve_ref(f"{profile}/{name}")
                except CatalogError:
                    raise PolicyError(f"unknown field {name!r} in [{profile}]") from None
                if name == "spdxId":
                    raise PolicyError("spdxId is always required and cannot be listed")
            required[profile] = names
        unknown = set(self.required_fields) - set(PROFILES)
        if unknown:
            raise PolicyError(f"unknown profile(s): {', '.join(sorted(unknown))}")
        for profile in ("ai", "dataset"):
            if not required[profile]:
                raise PolicyError(f"required set for {profile!r} is empty")
        for rule in self.cross_rules:
            if rule not in CROSS_RULES:
                raise PolicyError(f"unknown cross-rule {rule!r}")
        object.__setattr__(self, "required_fields", required)
        object.__setattr__(self, "cross_rules", tuple(r for r in CROSS_RULES if r in self.cross_rules))

    def required_for(self, package: BasePackage) -> list[str]:
        names = set(self.required_fields["base"])
        for profile in package.PROFILES:
            names |= self.required_fields[profile]
        order = [d.name for d in package.descriptors()]
        return [n for n in order if n in names]


def load_policy(data: bytes | str) -> ConformancePolicy:
    """Parse an INI policy file (``[policy] name``, profile sections, ``[cross-rules]``)."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PolicyError(f"policy is not UTF-8: {exc}") from None
    parser = configparser.ConfigParser(allow_no_value=True, interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(data)
    except configparser.Error as exc:
        raise PolicyError(f"malformed policy: {exc}") from None
    known = {"policy", "cross-rules", *PROFILES}
    extra = [s for s in parser.sections() if s not in known]
    if extra:
        raise PolicyError(f"unknown section(s): {', '.join(extra)}")
    if not parser.has_option("policy", "name"):
        raise PolicyError("missing [policy] name")
    required = {p: frozenset(parser.options(p)) if parser.has_section(p) else frozenset() for p in PROFILES}
    for profile in PROFILES:
        if parser.has_section(profile):
            for key, value in parser.items(profile):
                if value is not None:
                    raise PolicyError(f"[{profile}] lists field names only, got a value for {key!r}")
    rules = list(CROSS_RULES)
    if parser.has_section("cross-rules"):
        for rule, value in parser.items("cross-rules"):
            if rule not in CROSS_RULES:
                raise PolicyError(f"unknown cross-rule {rule!r}")
            switch = _SWITCH.get((value or "").strip().lower())
            if switch is None:
                raise PolicyError(f"cross-rule {rule} must be 'on' or 'off'")
            if not switch:
                rules.remove(rule)
    return ConformancePolicy(parser.get("policy", "name"), required, tuple(rules))


@lru_cache(maxsize=None)
def default_policy() -> ConformancePolicy:
    return load_policy(resources.files("aibom").joinpath("data/default-policy.ini").read_bytes())


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]
    policy_name: str
    verdict: Verdict = field(init=False)
    counts: dict[str, int] = field(init=False, hash=False)

    def __post_init__(self) -> None:
        findings = tuple(sort_findings(self.findings))
        object.__setattr__(self, "findings", findings)
        counts = {s.value: 0 for s in Severity}
        for f in findings:
            counts[f.severity.value] += 1
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "verdict", Verdict.FAIL if counts["error"] else Verdict.PASS)

    def codes(self, code: str) -> list[Finding]:
        return [f for f in self.findings if f.code == code]


def check_cross_rules(doc: Document, rules: Iterable[str] = CROSS_RULES) -> list[Finding]:
    rules = set(rules)
    out: list[Finding] = []
    if "SENSITIVE-NO-ANON" in rules:
        for ds in doc.packages(DatasetPackage):
            if ds.has_sensitive_personal_information is Presence.YES and not ds.anonymization_method_used:
                out.append(
                    finding("SENSITIVE-NO-ANON", field_path(ds.id, "anonymizationMethodUsed"),
                            "dataset declares sensitive personal information but no anonymization method")
                )
    if "REL-TYPE" in rules:
        for n, rel in enumerate(doc.relationships):
            if rel.type not in (RelationshipType.TRAINED_ON, RelationshipType.TESTED_ON):
                continue
            for target in rel.to:
                element = doc.index.get(target)
                if element is not None and not isinstance(element, DatasetPackage):
                    out.append(
                        finding("REL-TYPE", f"relationships[{n}]::to",
                                f"{rel.type.value} target {target!r} is a {type(element).__name__}, not a DatasetPackage")
                    )
    if "THRESHOLD-ORPHAN" in rules:
        for pkg in doc.packages(AiPackage):
            names = {m.name for m in pkg.metric}
            for entry in pkg.metric_decision_threshold:
                if entry.name not in names:
                    out.append(
                        finding("THRESHOLD-ORPHAN", field_path(pkg.id, "metricDecisionThreshold"),
                                f"threshold for {entry.name!r} but no metric of that name")
                    )
    return sort_findings(out)


def required_field_findings(doc: Document, policy: ConformancePolicy) -> list[Finding]:
    out = []
    for pkg in doc.packages():
        for name in policy.required_for(pkg):
            value = pkg.value(name)
            where = field_path(pkg.id, name)
            if not is_present(value):
                out.append(finding("REQ-MISSING", where, f"required field {name!r} is absent"))
            elif not is_populated(value):
                out.append(finding("REQ-NOASSERTION", where, f"required field {name!r} is an explicit no-assertion"))
    return out


def license_findings(doc: Document) -> list[Finding]:
    out = []
    for pkg in doc.packages():
        for name in ("declaredLicense", "concludedLicense"):
            expr = pkg.value(name)
            if expr is not None:
                out.extend(validate_license_ids(expr, path=field_path(pkg.id, name)))
    return out


def validate(
    doc: Document, policy: ConformancePolicy | None = None, read_findings: Iterable[Finding] = ()
) -> ValidationReport:
    """Check ``doc`` against ``policy`` (the shipped default if omitted)."""
    policy = policy or default_policy()
    findings = list(read_findings)
    findings += core_violations(doc)
    findings += required_field_findings(doc, policy)
    findings += license_findings(doc)
    findings += check_cross_rules(doc, policy.cross_rules)
    return ValidationReport(tuple(findings), policy.name)
