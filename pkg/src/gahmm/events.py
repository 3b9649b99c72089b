"""Observation events, vocabularies and integer encoding."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

OOV_NAME = "<oov>"
OOV_INDEX = 0

DEFAULT_ENTITY_PATTERN = r"H\d+|Entity-\d+"
DEFAULT_OBJECT_PATTERN = r"O\d+"


class ParseError(ValueError):
    """Raised for malformed event-stream or catalog text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ObservationSymbol:
    name: str
    index: int


@dataclass(frozen=True)
class ObservationEvent:
    symbol: str
    entity_ids: tuple[str, ...] = ()
    object_ids: tuple[str, ...] = ()
    timestamp: int = 0
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1] for {self.symbol!r}")
        if not self.symbol or any(c.isspace() for c in self.symbol):
            raise ValueError(f"invalid symbol name {self.symbol!r}")


class Vocabulary:
    """Immutable name <-> index mapping with a reserved out-of-vocabulary slot.

    Index 0 is always the OOV symbol; registered names follow in the order
    given, duplicates dropped.
    """

    def __init__(self, names: Iterable[str] = ()):
        ordered = [OOV_NAME]
        seen = {OOV_NAME}
        for name in names:
            if not name or any(c.isspace() for c in name):
                raise ValueError(f"symbol names may not contain whitespace: {name!r}")
            if name not in seen:
                seen.add(name)
                ordered.append(name)
        self._names = tuple(ordered)
        self._index = {n: i for i, n in enumerate(self._names)}

    @property
    def size(self) -> int:
        return len(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index and name != OOV_NAME

    def __iter__(self):
        return iter(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._names == other._names

    def __hash__(self):
        return hash(self._names)

    def __repr__(self):
        return f"Vocabulary(size={self.size})"

    @property
    def oov_index(self) -> int:
        return OOV_INDEX

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def symbols(self) -> list[ObservationSymbol]:
        return [ObservationSymbol(n, i) for i, n in enumerate(self._names)]

    def lookup(self, name: str) -> int:
        return self._index.get(name, OOV_INDEX)

    def name(self, index: int) -> str:
        return self._names[index]

    def extend(self, names: Iterable[str]) -> "Vocabulary":
        return Vocabulary(list(self._names[1:]) + list(names))

    def digest(self) -> str:
        """Stable content hash used to check bank/config compatibility."""
        return hashlib.sha256("\n".join(self._names).encode("utf-8")).hexdigest()


def encode(events: Sequence[ObservationEvent | str], vocab: Vocabulary) -> list[int]:
    return [vocab.lookup(e if isinstance(e, str) else e.symbol) for e in events]


class IdGrammar:
    """Splits `H2_O1_Object_carrying` style tokens into IDs and an action.

    Leading underscore-separated parts matching the entity or object pattern
    are taken as IDs, as are trailing parts matching the entity pattern
    (`H3_O2_Giving_H2`). A token that would be left with no action passes
    through unchanged.
    """

    def __init__(self, entity_pattern: str = DEFAULT_ENTITY_PATTERN,
                 object_pattern: str = DEFAULT_OBJECT_PATTERN):
        self.entity_re = re.compile(rf"(?:{entity_pattern})\Z")
        self.object_re = re.compile(rf"(?:{object_pattern})\Z")

    def split(self, token: str) -> tuple[str, tuple[str, ...], tuple[str, ...]]:
        parts = token.split("_")
        entities: list[str] = []
        objects: list[str] = []
        lo = 0
        while lo < len(parts):
            if self.entity_re.match(parts[lo]):
                entities.append(parts[lo])
            elif self.object_re.match(parts[lo]):
                objects.append(parts[lo])
            else:
                break
            lo += 1
        hi = len(parts)
        trailing: list[str] = []
        while hi > lo + 1 and self.entity_re.match(parts[hi - 1]):
            trailing.insert(0, parts[hi - 1])
            hi -= 1
        if lo >= hi:
            return token, (), ()
        return "_".join(parts[lo:hi]), tuple(entities + trailing), tuple(objects)


DEFAULT_GRAMMAR = IdGrammar()


def _union(*groups: Iterable[str]) -> tuple[str, ...]:
    out: list[str] = []
    for group in groups:
        for item in group:
            if item not in out:
                out.append(item)
    return tuple(out)


def strip_ids(event: ObservationEvent, grammar: IdGrammar = DEFAULT_GRAMMAR) -> ObservationEvent:
    action, entities, objects = grammar.split(event.symbol)
    return replace(
        event,
        symbol=action,
        entity_ids=_union(event.entity_ids, entities),
        object_ids=_union(event.object_ids, objects),
    )


def make_event(token: str, timestamp: int = 0, confidence: float = 1.0,
               grammar: IdGrammar = DEFAULT_GRAMMAR) -> ObservationEvent:
    """Build an event in prefixed form, reading IDs off the token."""
    _, entities, objects = grammar.split(token)
    return ObservationEvent(token, entities, objects, timestamp, confidence)


_INT_RE = re.compile(r"[+-]?\d+\Z")


def _parse_compact(text: str, grammar: IdGrammar) -> list[ObservationEvent]:
    body = text.strip()
    if not body.endswith("]"):
        raise ParseError("unterminated bracketed array", 1)
    tokens = [t.strip() for t in body[1:-1].split(",")]
    if tokens == [""]:
        return []
    events = []
    for pos, tok in enumerate(tokens):
        if not tok or any(c.isspace() for c in tok):
            raise ParseError(f"bad array element {tok!r} at position {pos}", 1)
        events.append(make_event(tok, pos, 1.0, grammar))
    return events


def parse_event_stream(text: str, aliases: Mapping[str, str] | None = None,
                       grammar: IdGrammar = DEFAULT_GRAMMAR) -> list[ObservationEvent]:
    """Parse line records `timestamp<TAB>token<TAB>confidence` or a `[a,b,...]` array.

    Timestamp and confidence are optional per line; missing timestamps become
    the record's ordinal position and missing confidences become 1.0.
    `aliases` renames tokens before IDs are read off them.
    """
    aliases = aliases or {}
    if text.lstrip().startswith("["):
        events = _parse_compact(text, grammar)
        return [make_event(aliases.get(e.symbol, e.symbol), e.timestamp, 1.0, grammar)
                for e in events]

    events: list[ObservationEvent] = []
    last_ts = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in raw.strip("\r\n").split("\t")]
        fields = [f for f in fields if f != ""]
        ts: int | None = None
        conf = 1.0
        try:
            if len(fields) == 1:
                (token,) = fields
            elif len(fields) == 2:
                if _INT_RE.match(fields[0]):
                    ts, token = int(fields[0]), fields[1]
                else:
                    token, conf = fields[0], float(fields[1])
            elif len(fields) == 3:
                if not _INT_RE.match(fields[0]):
                    raise ParseError(f"timestamp {fields[0]!r} is not an integer", lineno)
                ts, token, conf = int(fields[0]), fields[1], float(fields[2])
            else:
                raise ParseError(f"expected 1-3 tab-separated fields, got {len(fields)}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad confidence value: {exc}", lineno) from None
        if any(c.isspace() for c in token):
            raise ParseError(f"token {token!r} contains whitespace", lineno)
        if not 0.0 <= conf <= 1.0:
            raise ValueError(f"line {lineno}: confidence {conf} outside [0, 1]")
        if ts is None:
            ts = len(events)
        if last_ts is not None and ts < last_ts:
            raise ParseError(f"timestamp {ts} decreases (previous {last_ts})", lineno)
        last_ts = ts
        events.append(make_event(aliases.get(token, token), ts, conf, grammar))
    return events


def format_event_stream(events: Sequence[ObservationEvent]) -> str:
    return "".join(f"{e.timestamp}\t{e.symbol}\t{e.confidence!r}\n" for e in events)
