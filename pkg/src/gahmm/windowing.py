"""Window segmentation and stream filters applied before recognition."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

from gahmm.events import ObservationEvent
from gahmm.ontology import PairWeightTable


class WindowCase(enum.Enum):
    FIXED = "fixed"          # the whole stream is one window, n == w
    FLOORING = "flooring"    # floor(n / w) disjoint windows from the front
    SLIDING = "sliding"      # n - w + 1 windows, stride 1

    @classmethod
    def parse(cls, value: "str | WindowCase") -> "WindowCase":
        if isinstance(value, cls):
            return value
        aliases = {"1": cls.FIXED, "case-1": cls.FIXED, "2": cls.FLOORING,
                   "case-2": cls.FLOORING, "3": cls.SLIDING, "case-3": cls.SLIDING}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class WindowingPolicy:
    case: WindowCase = WindowCase.SLIDING
    w: int = 3

    def __post_init__(self):
        object.__setattr__(self, "case", WindowCase.parse(self.case))
        if self.w < 1:
            raise ValueError("window size must be >= 1")


@dataclass(frozen=True)
class Window:
    """A slice of the stream; `span` is the half-open index range it was drawn from.

    `indices` lists the positions actually used; they differ from
    range(*span) only when correlation selection skipped an event.
    """

    codes: tuple[int, ...]
    span: tuple[int, int]
    indices: tuple[int, ...] = ()
    substituted: bool = False
    flagged: bool = False

    def __post_init__(self):
        if not self.indices:
            object.__setattr__(self, "indices", tuple(range(*self.span)))


@dataclass(frozen=True)
class FrequencyRule:
    symbol_a: str
    symbol_b: str
    label_if_a_dominant: str
    label_if_b_dominant: str
    min_margin: int = 1

    def __post_init__(self):
        if self.min_margin < 1:
            raise ValueError("min_margin must be >= 1")


@dataclass(frozen=True)
class FilterConfig:
    confidence_floor: float = 0.0
    trivial_symbols: frozenset[str] = frozenset()
    correlation: bool = False
    correlation_threshold: float | None = None   # None: the catalog's base pair weight
    frequency_rules: tuple[FrequencyRule, ...] = ()
    collapse_repeats: bool = True

    def __post_init__(self):
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise ValueError("confidence_floor must lie in [0, 1]")
        object.__setattr__(self, "trivial_symbols", frozenset(self.trivial_symbols))
        object.__setattr__(self, "frequency_rules", tuple(self.frequency_rules))


def generate_windows(codes: Sequence[int], policy: WindowingPolicy) -> list[Window]:
    n, w = len(codes), policy.w
    if n < 1:
        raise ValueError("cannot window an empty stream")
    if policy.case is WindowCase.FIXED:
        if n != w:
            raise ValueError(f"fixed windowing needs n == w (n={n}, w={w})")
        return [Window(tuple(codes), (0, n))]
    if w > n:
        raise ValueError(f"window size {w} exceeds stream length {n}")
    if policy.case is WindowCase.FLOORING:
        starts = range(0, (n // w) * w, w)
    else:
        starts = range(n - w + 1)
    return [Window(tuple(codes[s:s + w]), (s, s + w)) for s in starts]


def filter_confidence(events: Sequence[ObservationEvent], floor: float) -> list[ObservationEvent]:
    if not 0.0 <= floor <= 1.0:
        raise ValueError("confidence floor must lie in [0, 1]")
    return [e for e in events if e.confidence >= floor]


def distinct_indices(codes: Sequence[Hashable], trivial: Iterable[Hashable] = (),
                     collapse: bool = True) -> list[int]:
    """Positions kept after dropping trivial codes and collapsing immediate repeats."""
    trivial = set(trivial)
    kept: list[int] = []
    for i, c in enumerate(codes):
        if c in trivial:
            continue
        if collapse and kept and codes[kept[-1]] == c:
            continue
        kept.append(i)
    return kept


def filter_trivial(codes: Sequence[Hashable], trivial: Iterable[Hashable] = ()) -> list:
    return [codes[i] for i in distinct_indices(codes, trivial)]


def correlation_select(codes: Sequence[int], table: PairWeightTable,
                       threshold: float | None = None, w: int = 3) -> list[Window]:
    """Sliding windows whose weak links are re-paired with a better-correlated successor.

    Each window starts at every position as in sliding windowing. Walking
    through a window, when the pair (current, next) weighs less than
    `threshold`, every later event that still leaves room to finish the
    window is considered and the one with the highest cumulative pair weight
    with the current event is used instead (earliest on ties). If no later
    event co-occurs with the current one at all, the plain window is kept
    and flagged.
    """
    if threshold is None:
        threshold = table.base_weight
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    plain = generate_windows(codes, WindowingPolicy(WindowCase.SLIDING, w))
    n = len(codes)
    out: list[Window] = []
    for win in plain:
        start = win.span[0]
        chosen = [start]
        substituted = flagged = False
        for slot in range(1, w):
            cur, nxt = chosen[-1], chosen[-1] + 1
            if table.weight(codes[cur], codes[nxt]) >= threshold:
                chosen.append(nxt)
                continue
            last_ok = n - (w - slot)
            best, best_wt = nxt, table.weight(codes[cur], codes[nxt])
            for j in range(nxt + 1, last_ok + 1):
                wt = table.weight(codes[cur], codes[j])
                if wt > best_wt:
                    best, best_wt = j, wt
            if best_wt == 0.0:
                flagged, substituted = True, False
                chosen = list(win.indices)
                break
            substituted = substituted or best != nxt
            chosen.append(best)
        out.append(Window(tuple(codes[i] for i in chosen), (chosen[0], chosen[-1] + 1),
                          tuple(chosen), substituted, flagged))
    return out


def frequency_disparity(codes: Sequence[Hashable], rules: Iterable[FrequencyRule]) -> list[tuple[str, int]]:
    counts = Counter(codes)
    out = []
    for rule in rules:
        ca, cb = counts[rule.symbol_a], counts[rule.symbol_b]
        if abs(ca - cb) >= rule.min_margin:
            out.append((rule.label_if_a_dominant if ca > cb else rule.label_if_b_dominant, abs(ca - cb)))
    return out
