"""Small document-editing helpers shared by several test modules."""

from __future__ import annotations

import dataclasses

from aibom.model import Document


def field_default(element, attr: str):
    for f in dataclasses.fields(element):
        if f.name == attr:
            if f.default is not dataclasses.MISSING:
                return f.default
            return f.default_factory()
    raise KeyError(attr)


def edit(doc: Document, element_id: str, **changes) -> Document:
    elements = tuple(
        dataclasses.replace(e, **changes) if e.id == element_id else e for e in doc.elements
    )
    return dataclasses.replace(doc, elements=elements)


def drop(doc: Document, element_id: str, field: str) -> Document:
    """Copy of ``doc`` with catalog ``field`` of ``element_id`` unset."""
    element = doc.index[element_id]
    attr = next(d.attr for d in element.descriptors() if d.name == field)
    return edit(doc, element_id, **{attr: field_default(element, attr)})
