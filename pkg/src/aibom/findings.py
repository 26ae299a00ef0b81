"""Finding records and the registry of stable finding codes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


#: code -> (default severity, short meaning). Codes are part of the public
#: contract: CI pipelines match on them, so never rename one.
REGISTRY: dict[str, tuple[Severity, str]] = {
    "REQ-MISSING": (Severity.ERROR, "required field absent"),
    "REQ-NOASSERTION": (Severity.INFO, "required field satisfied by an explicit no-assertion"),
    "REF-UNRESOLVED": (Severity.ERROR, "reference does not resolve to an element"),
    "REF-TYPE": (Severity.ERROR, "reference resolves to an element of the wrong type"),
    "CYCLE": (Severity.ERROR, "contains relationships form a cycle"),
    "TIME-ORDER": (Severity.ERROR, "builtTime is later than releaseTime"),
    "DOC-EMPTY": (Severity.ERROR, "document has no elements"),
    "ALIAS": (Severity.WARNING, "alias spelling normalized to the catalog name"),
    "UNKNOWN-FIELD": (Severity.WARNING, "unknown field preserved in extensions"),
    "UNKNOWN-LICENSE": (Severity.WARNING, "license or exception id not in the snapshot"),
    "SENSITIVE-NO-ANON": (Severity.WARNING, "sensitive personal information without anonymization"),
    "REL-TYPE": (Severity.ERROR, "trained-on/tested-on target is not a dataset"),
    "THRESHOLD-ORPHAN": (Severity.WARNING, "decision threshold for an unknown metric"),
    "TRANSFORM-FAILED": (Severity.WARNING, "hub value could not be converted"),
}


@dataclass(frozen=True, order=True)
class Finding:
    path: str
    code: str
    severity: Severity
    message: str

    def __post_init__(self) -> None:
        if self.code not in REGISTRY:
            raise ValueError(f"unregistered finding code {self.code!r}")
        if not self.path:
            raise ValueError("finding path must be non-empty")
        object.__setattr__(self, "severity", Severity(self.severity))


def finding(code: str, path: str, message: str, severity: Severity | None = None) -> Finding:
    """Build a finding using the registry's default severity for ``code``."""
    if severity is None:
        severity = REGISTRY[code][0]
    return Finding(path=path, code=code, severity=severity, message=message)


def field_path(element_id: str, field: str | None = None) -> str:
    return element_id if field is None else f"{element_id}::{field}"


def sort_findings(findings) -> list[Finding]:
    return sorted(findings, key=lambda f: (f.path, f.code, f.message))
