"""The field catalog: a data-driven description of every package field.

The catalog ships as ``data/fields.tsv`` and can be edited without touching
code. Each record gives a field name, the profile it belongs to, its value
kind, its cardinality and optional alias spellings accepted on read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

PROFILES = ("base", "ai", "dataset")
VALUE_KINDS = frozenset(
    {
        "text",
        "text-list",
        "mapping",
        "presence",
        "enum",
        "energy-list",
        "metric-list",
        "integer",
        "timestamp",
        "license-expression",
        "uri",
    }
)
CARDINALITIES = frozenset({"zero-or-one", "exactly-one", "zero-or-more"})

#: fields that identify a package rather than describe it; they are always
#: set, so automation and extraction statistics leave them out.
IDENTITY_FIELDS = frozenset({"spdxId"})


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class FieldDescriptor:
    name: str
    profile: str
    value_kind: str
    cardinality: str
    aliases: tuple[str, ...] = ()

    @property
    def attr(self) -> str:
        return attr_name(self.name)

    @property
    def ref(self) -> str:
        return f"{self.profile}/{self.name}"


def attr_name(field: str) -> str:
    """Python attribute holding a catalog field (``typeOfModel`` -> ``type_of_model``)."""
    if field == "spdxId":
        return "id"
    return re.sub(r"(?<!^)(?=[A-Z])", "_", field).lower()


@dataclass(frozen=True)
class Catalog:
    fields: tuple[FieldDescriptor, ...]

    def for_profile(self, profile: str) -> list[FieldDescriptor]:
        if profile not in PROFILES:
            raise CatalogError(f"unknown profile {profile!r}")
        return sorted((f for f in self.fields if f.profile == profile), key=lambda f: f.name)

    def ordered(self, *profiles: str) -> list[FieldDescriptor]:
        """Descriptors of ``profiles`` in file order (the canonical write order)."""
        return [f for f in self.fields if f.profile in profiles]

    def get(self, profile: str, name: str) -> FieldDescriptor | None:
        for f in self.fields:
            if f.profile == profile and f.name == name:
                return f
        return None

    def lookup(self, profiles: tuple[str, ...], name: str) -> tuple[FieldDescriptor, bool] | None:
        """Find ``name`` (or an alias of it) among ``profiles``.

        Returns the descriptor and whether an alias spelling matched.
        """
        for f in self.ordered(*profiles):
            if f.name == name:
                return f, False
        for f in self.ordered(*profiles):
            if name in f.aliases:
                return f, True
        return None

    def resolve_ref(self, ref: str) -> FieldDescriptor:
        """Resolve ``profile/field``; base fields are reachable from every profile."""
        profile, sep, name = ref.partition("/")
        if not sep or profile not in PROFILES:
            raise CatalogError(f"malformed field reference {ref!r} (expected profile/field)")
        found = self.get(profile, name) or self.get("base", name)
        if found is None:
            raise CatalogError(f"unknown field {name!r} for profile {profile!r}")
        return found

    def names(self) -> set[str]:
        return {f.name for f in self.fields}


def load_catalog(text: str) -> Catalog:
    records = []
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("#"):
            continue
        cols = raw.split("\t")
        if len(cols) not in (4, 5):
            raise CatalogError(f"line {lineno}: expected 4 or 5 tab-separated columns, got {len(cols)}")
        name, profile, kind, card = (c.strip() for c in cols[:4])
        aliases = tuple(a.strip() for a in cols[4].split(",") if a.strip()) if len(cols) == 5 else ()
        if not name:
            raise CatalogError(f"line {lineno}: empty field name")
        if profile not in PROFILES:
            raise CatalogError(f"line {lineno}: unknown profile {profile!r}")
        if kind not in VALUE_KINDS:
            raise CatalogError(f"line {lineno}: unknown value kind {kind!r}")
        if card not in CARDINALITIES:
            raise CatalogError(f"line {lineno}: unknown cardinality {card!r}")
        if (name, profile) in seen:
            raise CatalogError(f"line {lineno}: duplicate field {profile}/{name}")
        seen.add((name, profile))
        records.append(FieldDescriptor(name, profile, kind, card, aliases))
    if not records:
        raise CatalogError("field catalog is empty")
    return Catalog(tuple(records))


@lru_cache(maxsize=None)
def default_catalog() -> Catalog:
    text = resources.files("aibom").joinpath("data/fields.tsv").read_text(encoding="utf-8")
    return load_catalog(text)


@lru_cache(maxsize=None)
def energy_units() -> frozenset[str]:
    text = resources.files("aibom").joinpath("data/units.txt").read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def field_catalog(profile: str) -> list[FieldDescriptor]:
    """Catalog entries for ``profile``, sorted by name."""
    return default_catalog().for_profile(profile)
