"""Ontology catalogs: the rule DSL, label registration and pair correlation weights.

A catalog file looks like::

    # comments run to end of line
    @window 3
    @match generic
    @synonym Object_carrying carrying_object Object_Carrying
    @layer 0
    Towards_cabinet - opens_cabinet - object_picked -> Object_taken_cabinet @indoor

Pattern elements are separated by a hyphen with whitespace on both sides, so
symbols such as `Entity-1_carrying_object` keep their inner hyphen. Labels may
contain spaces; their symbol form joins words with underscores.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from gahmm.events import DEFAULT_GRAMMAR, IdGrammar, ObservationEvent, ParseError, Vocabulary

MATCH_MODES = ("exact", "generic")


class CatalogError(ValueError):
    pass


def label_symbol(label: str) -> str:
    return re.sub(r"\s+", "_", label.strip())


@dataclass(frozen=True)
class OntologyEntry:
    pattern: tuple[str, ...]
    label: str
    context_tags: frozenset[str] = frozenset()
    layer: int = 0

    @property
    def symbol(self) -> str:
        return label_symbol(self.label)

    def render(self) -> str:
        tags = "".join(f" @{t}" for t in sorted(self.context_tags))
        return f"{' - '.join(self.pattern)} -> {self.label}{tags}"


@dataclass(frozen=True)
class Catalog:
    entries: tuple[OntologyEntry, ...]
    window: int
    match: str = "exact"
    synonyms: Mapping[str, str] = field(default_factory=dict)
    grammar: IdGrammar = field(default=DEFAULT_GRAMMAR, compare=False, repr=False)

    def __post_init__(self):
        if not self.entries:
            raise CatalogError("empty catalog")
        if self.match not in MATCH_MODES:
            raise CatalogError(f"unknown match mode {self.match!r}")
        seen: dict[tuple[str, ...], str] = {}
        for e in self.entries:
            if len(e.pattern) != self.window:
                raise CatalogError(
                    f"rule '{e.render()}' has {len(e.pattern)} symbols, catalog window is {self.window}")
            key = tuple(self.canonical(s) for s in e.pattern)
            if key in seen:
                raise CatalogError(
                    f"duplicate pattern {' - '.join(key)} for labels {seen[key]!r} and {e.label!r}")
            seen[key] = e.label
        object.__setattr__(self, "_vocab", self._build_vocab())

    def canonical(self, name: str) -> str:
        """Name as the models see it: IDs stripped in generic mode, synonyms folded."""
        if self.match == "generic":
            name = self.grammar.split(name)[0]
        return self.synonyms.get(name, name)

    def canonical_event(self, event: ObservationEvent) -> str:
        return self.canonical(event.symbol)

    def _build_vocab(self) -> Vocabulary:
        names: list[str] = []
        for e in self.entries:
            names.extend(self.canonical(s) for s in e.pattern)
        names.extend(self.canonical(e.symbol) for e in self.entries)
        return Vocabulary(names)

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab  # type: ignore[attr-defined]

    @property
    def labels(self) -> list[str]:
        out: list[str] = []
        for e in self.entries:
            if e.label not in out:
                out.append(e.label)
        return out

    def label_code(self, label: str) -> int:
        return self.vocab.lookup(self.canonical(label_symbol(label)))

    def encode_pattern(self, entry: OntologyEntry) -> list[int]:
        return [self.vocab.lookup(self.canonical(s)) for s in entry.pattern]

    def encode_names(self, names: Iterable[str]) -> list[int]:
        return [self.vocab.lookup(self.canonical(n)) for n in names]

    def select(self, tags: Iterable[str]) -> "Catalog":
        """Entries without tags, plus those sharing a tag with `tags`."""
        tags = set(tags)
        kept = tuple(e for e in self.entries if not e.context_tags or e.context_tags & tags)
        return Catalog(kept, self.window, self.match, self.synonyms, self.grammar)

    def merge(self, *others: "Catalog") -> "Catalog":
        entries = list(self.entries)
        synonyms = dict(self.synonyms)
        for other in others:
            if other.window != self.window:
                raise CatalogError(f"cannot merge catalogs with windows {self.window} and {other.window}")
            if other.match != self.match:
                raise CatalogError(f"cannot merge '{self.match}' and '{other.match}' catalogs")
            for alt, canon in other.synonyms.items():
                if synonyms.get(alt, canon) != canon:
                    raise CatalogError(f"conflicting synonym for {alt!r}")
                synonyms[alt] = canon
            entries.extend(other.entries)
        return Catalog(tuple(entries), self.window, self.match, synonyms, self.grammar)


_RULE_SPLIT = re.compile(r"\s+-\s+")


def parse_catalog(text: str, grammar: IdGrammar = DEFAULT_GRAMMAR) -> Catalog:
    window: int | None = None
    match = "exact"
    layer = 0
    synonyms: dict[str, str] = {}
    entries: list[OntologyEntry] = []
    first_rule_line = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            directive, *args = line[1:].split()
            if directive == "window" and len(args) == 1 and args[0].isdigit() and int(args[0]) >= 1:
                window = int(args[0])
            elif directive == "match" and len(args) == 1 and args[0] in MATCH_MODES:
                match = args[0]
            elif directive == "layer" and len(args) == 1 and args[0].isdigit():
                layer = int(args[0])
            elif directive == "synonym" and len(args) >= 2:
                canon = args[0]
                for alt in args[1:]:
                    if synonyms.get(alt, canon) != canon:
                        raise ParseError(f"{alt!r} already a synonym of {synonyms[alt]!r}", lineno)
                    synonyms[alt] = canon
            else:
                raise ParseError(f"bad directive {line!r}", lineno)
            continue

        if "->" not in line:
            raise ParseError(f"expected 'pattern -> Label', got {line!r}", lineno)
        lhs, rhs = line.split("->", 1)
        pattern = tuple(p.strip() for p in _RULE_SPLIT.split(lhs.strip()))
        if any(not p or any(c.isspace() for c in p) for p in pattern):
            raise ParseError(f"bad pattern {lhs.strip()!r}", lineno)
        label_part, *tag_parts = re.split(r"\s+@", " " + rhs.strip())
        label = label_part.strip()
        if not label:
            raise ParseError("missing label", lineno)
        tags = frozenset(t.strip() for t in tag_parts)
        if any(not t or any(c.isspace() for c in t) for t in tags):
            raise ParseError(f"bad tag list {rhs.strip()!r}", lineno)
        if first_rule_line is None:
            first_rule_line = lineno
        if window is None:
            window = len(pattern)
        elif len(pattern) != window:
            raise CatalogError(
                f"line {lineno}: rule '{line}' has {len(pattern)} symbols, expected {window}")
        entries.append(OntologyEntry(pattern, label, tags, layer))

    if not entries:
        raise CatalogError("empty catalog")
    return Catalog(tuple(entries), window, match, synonyms, grammar)


def render_catalog(catalog: Catalog) -> str:
    lines = [f"@window {catalog.window}"]
    if catalog.match != "exact":
        lines.append(f"@match {catalog.match}")
    groups: dict[str, list[str]] = {}
    for alt, canon in catalog.synonyms.items():
        groups.setdefault(canon, []).append(alt)
    for canon in sorted(groups):
        lines.append(f"@synonym {canon} {' '.join(sorted(groups[canon]))}")
    layer = 0
    for e in catalog.entries:
        if e.layer != layer:
            lines.append(f"@layer {e.layer}")
            layer = e.layer
        lines.append(e.render())
    return "\n".join(lines) + "\n"


def correlation_wt(x: float, y: int) -> float:
    """Cumulative weight of an ordered pair seen `y` times, each occurrence worth `x`.

    The first occurrence is worth x; every further one closes half of the
    remaining gap to 1, giving 1 - (1 - x) / 2**(y - 1).
    """
    if not 0.0 < x <= 1.0:
        raise ValueError(f"base weight must lie in (0, 1], got {x}")
    if int(y) != y or y < 1:
        raise ValueError(f"occurrence count must be a positive integer, got {y}")
    return 1.0 - (1.0 - x) / 2.0 ** (int(y) - 1)


@dataclass(frozen=True)
class PairWeightTable:
    base_weight: float
    counts: Mapping[tuple[int, int], int]
    cumulative: Mapping[tuple[int, int], float]

    def weight(self, a: int, b: int) -> float:
        return self.cumulative.get((a, b), 0.0)


def build_pair_weights(catalog: Catalog) -> PairWeightTable:
    if catalog.window < 2:
        raise CatalogError("pair weights need patterns of at least two symbols")
    x = 1.0 / (catalog.window - 1)
    counts: Counter[tuple[int, int]] = Counter()
    for entry in catalog.entries:
        codes = catalog.encode_pattern(entry)
        counts.update(zip(codes, codes[1:]))
    cumulative = {pair: correlation_wt(x, y) for pair, y in sorted(counts.items())}
    return PairWeightTable(x, dict(sorted(counts.items())), cumulative)
