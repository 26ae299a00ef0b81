"""License expression parsing, canonical rendering and id validation.

Grammar, loosest binding last::

    expr   := and ("OR" and)*
    and    := with ("AND" with)*
    with   := simple ("WITH" exception)?
    simple := id "+"? | "LicenseRef-..." | "(" expr ")"

Binary operators associate to the left. Operators are upper-case keywords;
identifiers are case-sensitive.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Union

from aibom.findings import Finding, finding

MAX_DEPTH = 200

_TOKEN = re.compile(r"\s*(?:(?P<lp>\()|(?P<rp>\))|(?P<plus>\+)|(?P<word>[A-Za-z0-9.\-:]+))")
_REF_RE = re.compile(r"^(?:DocumentRef-[A-Za-z0-9.\-]+:)?LicenseRef-[A-Za-z0-9.\-]+$")
_ID_RE = re.compile(r"^[A-Za-z0-9.\-]+$")
_KEYWORDS = frozenset({"AND", "OR", "WITH"})


class LicenseParseError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class LicenseId:
    id: str
    or_later: bool = False


@dataclass(frozen=True)
class LicenseRef:
    ref: str


@dataclass(frozen=True)
class With:
    license: LicenseId
    exception: str


@dataclass(frozen=True)
class And:
    left: "LicenseExpression"
    right: "LicenseExpression"


@dataclass(frozen=True)
class Or:
    left: "LicenseExpression"
    right: "LicenseExpression"


LicenseExpression = Union[LicenseId, LicenseRef, With, And, Or]


@dataclass(frozen=True)
class LicenseSnapshot:
    version: str
    license_ids: frozenset[str]
    exception_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.version:
            raise ValueError("license snapshot version must be non-empty")
        if not self.license_ids or not self.exception_ids:
            raise ValueError("license snapshot id sets must be non-empty")


def load_snapshot(text: str) -> LicenseSnapshot:
    """Read a snapshot file: ``# <version>`` header, ids, ``[exceptions]``, ids."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("license snapshot must start with a '# <version>' header line")
    version = lines[0].lstrip("#").strip()
    licenses: set[str] = set()
    exceptions: set[str] = set()
    target = licenses
    for raw in lines[1:]:
        line = raw.strip()
        if not line:
            continue
        if line == "[exceptions]":
            target = exceptions
            continue
        target.add(line)
    return LicenseSnapshot(version, frozenset(licenses), frozenset(exceptions))


@lru_cache(maxsize=None)
def default_snapshot() -> LicenseSnapshot:
    text = resources.files("aibom").joinpath("data/licenses.txt").read_text(encoding="utf-8")
    return load_snapshot(text)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise LicenseParseError(f"unexpected character {text[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if kind == "word" and value in _KEYWORDS:
            kind = value
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> LicenseExpression:
        node = self.parse_or()
        kind, value, offset = self.peek()
        if kind != "eof":
            raise LicenseParseError(f"unexpected {value!r}", offset)
        return node

    def parse_or(self) -> LicenseExpression:
        node = self.parse_and()
        while self.peek()[0] == "OR":
            self.advance()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> LicenseExpression:
        node = self.parse_with()
        while self.peek()[0] == "AND":
            self.advance()
            node = And(node, self.parse_with())
        return node

    def parse_with(self) -> LicenseExpression:
        node = self.parse_simple()
        if self.peek()[0] == "WITH":
            _, _, offset = self.advance()
            if not isinstance(node, LicenseId):
                raise LicenseParseError("WITH must follow a single license identifier", offset)
            kind, value, exc_offset = self.advance()
            if kind != "word":
                raise LicenseParseError("expected an exception identifier after WITH", exc_offset)
            node = With(node, value)
        return node

    def parse_simple(self) -> LicenseExpression:
        kind, value, offset = self.advance()
        if kind == "lp":
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise LicenseParseError("expression nested too deeply", offset)
            node = self.parse_or()
            close_kind, close_value, close_offset = self.advance()
            if close_kind != "rp":
                raise LicenseParseError("expected ')'", close_offset)
            self.depth -= 1
            return node
        if kind == "word":
            if "LicenseRef-" in value:
                if not _REF_RE.match(value):
                    raise LicenseParseError(f"malformed license reference {value!r}", offset)
                if self.peek()[0] == "plus":
                    raise LicenseParseError("'+' cannot follow a LicenseRef", self.peek()[2])
                return LicenseRef(value)
            if not _ID_RE.match(value):
                raise LicenseParseError(f"malformed license identifier {value!r}", offset)
            if self.peek()[0] == "plus":
                self.advance()
                return LicenseId(value, or_later=True)
            return LicenseId(value)
        if kind == "eof":
            raise LicenseParseError("unexpected end of expression", offset)
        raise LicenseParseError(f"unexpected {value!r}", offset)


def parse_license_expression(text: str) -> LicenseExpression:
    """Parse ``text`` into its unique expression tree.

    Raises :class:`LicenseParseError` carrying the character offset of the
    first offending token (end of input for truncated expressions).
    """
    return _Parser(text).parse()


def _precedence(node: LicenseExpression) -> int:
    if isinstance(node, Or):
        return 0
    if isinstance(node, And):
        return 1
    return 2


def render_license_expression(node: LicenseExpression) -> str:
    """Render with the fewest parentheses that still parse back to ``node``."""
    if isinstance(node, LicenseId):
        return node.id + ("+" if node.or_later else "")
    if isinstance(node, LicenseRef):
        return node.ref
    if isinstance(node, With):
        return f"{render_license_expression(node.license)} WITH {node.exception}"
    op = "OR" if isinstance(node, Or) else "AND"
    prec = _precedence(node)
    left = render_license_expression(node.left)
    if _precedence(node.left) < prec:
        left = f"({left})"
    right = render_license_expression(node.right)
    # left associativity: an equal-precedence right child needs parentheses
    if _precedence(node.right) <= prec:
        right = f"({right})"
    return f"{left} {op} {right}"


def iter_symbols(node: LicenseExpression) -> Iterator[LicenseId | LicenseRef | str]:
    """Yield license ids, refs and exception names in left-to-right order."""
    if isinstance(node, (LicenseId, LicenseRef)):
        yield node
    elif isinstance(node, With):
        yield node.license
        yield node.exception
    else:
        yield from iter_symbols(node.left)
        yield from iter_symbols(node.right)


def validate_license_ids(
    node: LicenseExpression, snapshot: LicenseSnapshot | None = None, path: str = "license"
) -> list[Finding]:
    snapshot = snapshot or default_snapshot()
    findings = []
    for symbol in iter_symbols(node):
        if isinstance(symbol, LicenseRef):
            continue
        if isinstance(symbol, LicenseId):
            if symbol.id not in snapshot.license_ids:
                findings.append(
                    finding(
                        "UNKNOWN-LICENSE",
                        path,
                        f"license id {symbol.id!r} is not in license list {snapshot.version}",
                    )
                )
        elif symbol.startswith(("LicenseRef-", "AdditionRef-")) or ":LicenseRef-" in symbol:
            continue
        elif symbol not in snapshot.exception_ids:
            findings.append(
                finding(
                    "UNKNOWN-LICENSE",
                    path,
                    f"exception id {symbol!r} is not in license list {snapshot.version}",
                )
            )
    return findings


def normalize_license_case(text: str, snapshot: LicenseSnapshot | None = None) -> str:
    """Map identifiers to their snapshot spelling, ignoring case.

    Operators are upper-cased. Words not found in the snapshot are left as-is.
    """
    snapshot = snapshot or default_snapshot()
    by_lower = {k.lower(): k for k in snapshot.license_ids | snapshot.exception_ids}

    def fix(m: re.Match) -> str:
        word = m.group(0)
        if word.upper() in _KEYWORDS:
            return word.upper()
        return by_lower.get(word.lower(), word)

    return re.sub(r"[A-Za-z0-9.\-:]+", fix, text)
