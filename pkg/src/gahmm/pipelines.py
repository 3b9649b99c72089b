"""Concatenated, cascaded and context-split recognition over layered model banks."""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from gahmm.events import ObservationEvent, make_event
from gahmm.hmm import (
    ModelBank,
    best_possible_log_likelihood,
    build_model_bank,
    forward_log_likelihood,
    score_all,
    uniform_floor,
    viterbi,
)
from gahmm.ontology import Catalog, build_pair_weights, label_symbol
from gahmm.windowing import (
    FilterConfig,
    Window,
    WindowCase,
    WindowingPolicy,
    correlation_select,
    distinct_indices,
    frequency_disparity,
    generate_windows,
)

ARCHITECTURES = ("N", "C", "H")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RecognitionResult:
    label: str
    log_likelihood: float
    span: tuple[int, int]
    layer: int = 0
    architecture: str = "N"
    provenance: tuple[str, ...] = ()
    token: str = ""
    sources: tuple[int, ...] = ()
    confidence: float = 1.0
    context: str | None = None
    kind: str = "window"

    def with_context(self, context: str | None, architecture: str | None = None) -> "RecognitionResult":
        return replace(self, context=context, architecture=architecture or self.architecture)


@dataclass(frozen=True)
class Item:
    """One stream position: an event plus the source-stream indices it stands for."""

    event: ObservationEvent
    sources: tuple[int, ...]

    @property
    def token(self) -> str:
        return self.event.symbol


@dataclass
class Layer:
    """Everything one recognition layer needs.

    `floor` is the minimum log-likelihood for a window's best label to count
    as recognized; None means the uniform-emission score for that window
    length. `min_confidence` additionally requires
    exp(score - best possible score of the label) to reach the given value.
    """

    catalog: Catalog
    bank: ModelBank | None = None
    policy: WindowingPolicy | None = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    architecture: str = "C"
    floor: float | None = None
    min_confidence: float = 0.0
    decoder: str = "per_class"
    max_passes: int = 10
    alpha: float = 0.1

    def __post_init__(self):
        if self.bank is None:
            self.bank = build_model_bank(self.catalog, self.alpha)
        if self.policy is None:
            self.policy = WindowingPolicy(WindowCase.SLIDING, self.catalog.window)
        if self.architecture not in ("N", "C"):
            raise ConfigError(f"layer architecture must be N or C, got {self.architecture!r}")
        if self.decoder not in ("per_class", "label_state"):
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if tuple(self.bank.vocab_names) != self.catalog.vocab.names:
            raise ConfigError("model bank vocabulary does not match the catalog")
        if self.policy.w != self.catalog.window:
            raise ConfigError(f"window size {self.policy.w} differs from catalog pattern length "
                              f"{self.catalog.window}")
        self._best = {label: best_possible_log_likelihood(m, self.catalog.window)
                      for label, m in self.bank.per_class.items()}
        self._pairs = build_pair_weights(self.catalog) if self.catalog.window >= 2 else None

    @property
    def w(self) -> int:
        return self.catalog.window

    def label_tokens(self) -> set[str]:
        return {self.catalog.canonical(label_symbol(lbl)) for lbl in self.catalog.labels}


@dataclass
class LayerStack:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("a layer stack needs at least one layer")
        for k in range(1, len(self.layers)):
            below, here = self.layers[k - 1], self.layers[k]
            missing = sorted(t for t in below.label_tokens() if t not in here.catalog.vocab)
            if missing:
                raise ConfigError(f"layer {k} catalog does not know layer {k - 1} labels: "
                                  f"{', '.join(missing)}")


@dataclass(frozen=True)
class ContextPartition:
    contexts: Mapping[str, tuple[int, ...]]

    def sequences(self, events: Sequence[ObservationEvent]) -> dict[str, list[ObservationEvent]]:
        return {key: [events[i] for i in idx] for key, idx in self.contexts.items()}


class Tracer:
    """Collects (kind, payload) records describing what a run did."""

    def __init__(self):
        self.records: list[tuple[str, dict]] = []

    def __call__(self, kind: str, **payload):
        self.records.append((kind, payload))


def _noop(kind, **payload):
    pass


def _as_items(stream: Sequence[ObservationEvent | str | Item]) -> list[Item]:
    items = []
    for i, e in enumerate(stream):
        if isinstance(e, Item):
            items.append(e)
        elif isinstance(e, str):
            items.append(Item(make_event(e, i), (i,)))
        else:
            items.append(Item(e, (i,)))
    return items


def _span(sources: Iterable[int]) -> tuple[int, int]:
    s = list(sources)
    return (min(s), max(s) + 1)


def _natural_key(ident: str):
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", ident)]


def _union(groups: Iterable[Iterable[str]]) -> tuple[str, ...]:
    out: list[str] = []
    for g in groups:
        for x in g:
            if x not in out:
                out.append(x)
    return tuple(out)


class _LayerRun:
    def __init__(self, layer: Layer, index: int, allowed: set[str] | None, trace):
        self.layer = layer
        self.index = index
        self.allowed = allowed
        self.trace = trace
        self.cat = layer.catalog

    def codes(self, items: Sequence[Item]) -> list[int]:
        return self.cat.encode_names(it.token for it in items)

    def prepare(self, items: list[Item]) -> tuple[list[Item], list[RecognitionResult]]:
        f = self.layer.filters
        kept = []
        for it in items:
            if it.event.confidence < f.confidence_floor:
                self.trace("drop", layer=self.index, token=it.token, reason="confidence",
                           confidence=it.event.confidence, floor=f.confidence_floor)
            else:
                kept.append(it)
        items = kept

        extra: list[RecognitionResult] = []
        if f.frequency_rules and items:
            names = [self.cat.canonical(it.token) for it in items]
            rules = [replace(r, symbol_a=self.cat.canonical(r.symbol_a),
                             symbol_b=self.cat.canonical(r.symbol_b)) for r in f.frequency_rules]
            srcs = tuple(sorted(s for it in items for s in it.sources))
            for label, margin in frequency_disparity(names, rules):
                self.trace("frequency", layer=self.index, label=label, margin=margin)
                extra.append(RecognitionResult(
                    label, 0.0, _span(srcs), self.index, self.layer.architecture,
                    ("frequency_disparity", f"margin={margin}"), label_symbol(label), srcs,
                    1.0, kind="frequency"))

        names = [self.cat.canonical(it.token) for it in items]
        trivial = {self.cat.canonical(t) for t in f.trivial_symbols}
        keep = distinct_indices(names, trivial, f.collapse_repeats)
        keep_set = set(keep)
        for i, it in enumerate(items):
            if i not in keep_set:
                reason = "trivial" if names[i] in trivial else "repeat"
                self.trace("drop", layer=self.index, token=it.token, reason=reason)
        return [items[i] for i in keep], extra

    def score(self, codes: Sequence[int]) -> tuple[str | None, float, float, dict[str, float]]:
        """Best label, its score, its confidence and all scores for one window."""
        bank = self.layer.bank
        if self.layer.decoder == "label_state":
            path, _ = viterbi(bank.label_state, codes)
            label = bank.label_state.state_labels[path[-1]]
            ll = forward_log_likelihood(bank.label_state, codes)
            best = best_possible_log_likelihood(bank.label_state, len(codes))
            scores = {label: ll}
        else:
            scores = score_all(bank, codes)
            if self.allowed is not None:
                scores = {k: v for k, v in scores.items() if k in self.allowed}
            if not scores:
                return None, -math.inf, 0.0, scores
            label = max(scores, key=lambda k: scores[k])
            ll = scores[label]
            best = self.layer._best[label]
        if self.allowed is not None and label not in self.allowed:
            return None, -math.inf, 0.0, scores
        conf = min(1.0, max(math.exp(ll - best), sys.float_info.min)) if math.isfinite(ll) else 0.0
        return label, ll, conf, scores

    def accept(self, label, ll, conf, n) -> bool:
        if label is None or not math.isfinite(ll):
            return False
        floor = self.layer.floor
        if floor is None:
            floor = uniform_floor(self.cat.vocab.size, n)
        return ll >= floor and conf >= self.layer.min_confidence

    def recognize(self, window_items: Sequence[Item], provenance: tuple[str, ...] = ()):
        codes = self.codes(window_items)
        label, ll, conf, scores = self.score(codes)
        ok = self.accept(label, ll, conf, len(codes))
        self.trace("window", layer=self.index, tokens=[it.token for it in window_items],
                   scores=scores, label=label, accepted=ok, provenance=list(provenance))
        if not ok:
            return None
        sources = tuple(sorted(s for it in window_items for s in it.sources))
        entities = _union(it.event.entity_ids for it in window_items)
        objects = _union(it.event.object_ids for it in window_items)
        sym = label_symbol(label)
        prefix = tuple(sorted(entities, key=_natural_key))
        token = "_".join(prefix + (sym,)) if self.cat.match == "generic" and entities else sym
        result = RecognitionResult(label, ll, _span(sources), self.index, self.layer.architecture,
                                   provenance, token, sources, conf)
        ts = max(it.event.timestamp for it in window_items)
        item = Item(ObservationEvent(token, entities, objects, ts, 1.0), sources)
        return result, item

    def run_concatenated(self, items: list[Item]) -> tuple[list[Item], list[RecognitionResult]]:
        if not items:
            return [], []
        codes = self.codes(items)
        layer = self.layer
        if layer.filters.correlation and layer.policy.case is WindowCase.SLIDING and len(codes) >= layer.w:
            windows = correlation_select(codes, layer._pairs, layer.filters.correlation_threshold, layer.w)
        else:
            try:
                windows = generate_windows(codes, layer.policy)
            except ValueError as exc:
                self.trace("skip", layer=self.index, reason=str(exc), n=len(codes))
                return [], []
        self.trace("windows", layer=self.index, case=layer.policy.case.value, n=len(codes),
                   w=layer.w, count=len(windows),
                   unconsumed=len(codes) - (windows[-1].span[1] if windows else 0))
        results, out = [], []
        for win in windows:
            prov = ()
            if win.substituted:
                prov = ("correlation_substitution",)
            elif win.flagged:
                prov = ("correlation_flagged",)
            got = self.recognize([items[i] for i in win.indices], prov)
            if got:
                results.append(got[0])
                out.append(got[1])
        return out, results

    def run_cascaded(self, items: list[Item], max_passes: int) -> tuple[list[Item], list[RecognitionResult]]:
        w = self.layer.w
        if w < 2:
            raise ConfigError("cascaded recognition needs windows of at least 2 events")
        if max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        case = self.layer.policy.case
        items = list(items)
        results: list[RecognitionResult] = []
        for npass in range(1, max_passes + 1):
            changed = False
            pos = 0
            while pos + w <= len(items):
                if case is WindowCase.FIXED and len(items) != w:
                    break
                got = self.recognize(items[pos:pos + w], ("cascade", f"pass={npass}"))
                if got is None:
                    pos += w if case is WindowCase.FLOORING else 1
                    continue
                res, item = got
                items[pos:pos + w] = [item]
                results.append(res)
                changed = True
                self.trace("substitute", layer=self.index, position=pos, label=res.label,
                           stream=[it.token for it in items])
                # rewind to the first window that contains the new label
                pos = max(0, pos - w + 1) if case is not WindowCase.FLOORING else pos
            if not changed:
                break
        return items, results

    def run(self, items: list[Item]) -> tuple[list[Item], list[RecognitionResult]]:
        items, extra = self.prepare(items)
        self.trace("stream", layer=self.index, stream=[it.token for it in items])
        if self.layer.architecture == "N":
            out, results = self.run_concatenated(items)
        else:
            out, results = self.run_cascaded(items, self.layer.max_passes)
        return out, results + extra


def run_nhmm(stream: Sequence[ObservationEvent | str], layer: Layer, *, layer_index: int = 0,
             trace=None) -> list[RecognitionResult]:
    """Score every window independently and return accepted labels in span order."""
    runner = _LayerRun(replace(layer, architecture="N"), layer_index, None, trace or _noop)
    _, results = runner.run(_as_items(stream))
    return sorted(results, key=lambda r: (r.span, r.kind))


def run_chmm(stream: Sequence[ObservationEvent | str], layer: Layer, max_passes: int | None = None, *,
             layer_index: int = 0, trace=None) -> tuple[list[str], list[RecognitionResult]]:
    """Cascade: accepted windows are replaced in the stream by their label.

    Returns the final stream's tokens and the recognitions in the order they
    were made.
    """
    runner = _LayerRun(replace(layer, architecture="C"), layer_index, None, trace or _noop)
    items, _ = runner.prepare(_as_items(stream))
    runner.trace("stream", layer=layer_index, stream=[it.token for it in items])
    items, results = runner.run_cascaded(items, max_passes if max_passes is not None else layer.max_passes)
    return [it.token for it in items], results


def run_layer_stack(stream: Sequence[ObservationEvent | str | Item], stack: LayerStack, *,
                    allowed: set[str] | None = None, trace=None) -> list[list[RecognitionResult]]:
    """Run each layer on the stream produced by the layer below it."""
    trace = trace or _noop
    items = _as_items(stream)
    per_layer = []
    for k, layer in enumerate(stack.layers):
        items, results = _LayerRun(layer, k, allowed, trace).run(items)
        per_layer.append(results)
    return per_layer


def _entity_spans(events: Sequence[ObservationEvent]) -> dict[str, tuple[int, int]]:
    spans: dict[str, tuple[int, int]] = {}
    for i, e in enumerate(events):
        for ent in e.entity_ids:
            lo, _ = spans.get(ent, (i, i))
            spans[ent] = (lo, i)
    return spans


def partition_contexts(events: Sequence[ObservationEvent], mode: str = "per_entity",
                       catalog: Catalog | None = None, tags: Iterable[str] | None = None) -> ContextPartition:
    """Split a stream into per-entity or per-tag subsequences of event indices.

    per_entity: an event goes to every entity it names; an event naming no
    entity goes to every entity whose first and last mention bracket it (all
    entities if none do). by_tag: an event goes to each requested tag whose
    usable entries (untagged or carrying that tag) mention its symbol; events
    that no entry mentions go everywhere.
    """
    if mode == "per_entity":
        spans = _entity_spans(events)
        if not spans:
            raise ConfigError("no entity IDs in the stream; use by_tag context mode")
        contexts: dict[str, list[int]] = {ent: [] for ent in spans}
        for i, e in enumerate(events):
            targets = [ent for ent in spans if ent in e.entity_ids]
            if not targets:
                targets = [ent for ent, (lo, hi) in spans.items() if lo <= i <= hi] or list(spans)
            for ent in targets:
                contexts[ent].append(i)
        return ContextPartition({k: tuple(v) for k, v in contexts.items()})

    if mode == "by_tag":
        if catalog is None:
            raise ConfigError("by_tag context mode needs a catalog")
        all_tags = sorted({t for e in catalog.entries for t in e.context_tags})
        keys = list(tags) if tags is not None else all_tags
        if not keys:
            raise ConfigError("by_tag context mode needs at least one tag")
        mentioned: dict[str, set[str]] = {k: set() for k in keys}
        anywhere: set[str] = set()
        for entry in catalog.entries:
            syms = {catalog.canonical(s) for s in entry.pattern}
            syms.add(catalog.canonical(entry.symbol))
            anywhere |= syms
            for k in keys:
                if not entry.context_tags or k in entry.context_tags:
                    mentioned[k] |= syms
        contexts = {k: [] for k in keys}
        for i, e in enumerate(events):
            name = catalog.canonical(e.symbol)
            for k in keys:
                if name in mentioned[k] or name not in anywhere:
                    contexts[k].append(i)
        return ContextPartition({k: tuple(v) for k, v in contexts.items()})

    raise ConfigError(f"unknown context mode {mode!r}")


def allowed_labels(catalog: Catalog, tag: str) -> set[str]:
    return {e.label for e in catalog.entries if not e.context_tags or tag in e.context_tags}


def run_hhmm(events: Sequence[ObservationEvent], stack: LayerStack, mode: str = "per_entity",
             tags: Iterable[str] | None = None, trace=None) -> dict[str, list[RecognitionResult]]:
    """Recognize each context's subsequence independently through the layer stack.

    Result spans and sources refer to indices in `events`, not in the
    context subsequence.
    """
    trace = trace or _noop
    partition = partition_contexts(events, mode, stack.layers[0].catalog, tags)
    out: dict[str, list[RecognitionResult]] = {}
    for key, idx in partition.contexts.items():
        trace("context", context=key, indices=list(idx), stream=[events[i].symbol for i in idx])
        items = [Item(events[i], (i,)) for i in idx]
        allowed = None
        if mode == "by_tag":
            allowed = set().union(*(allowed_labels(layer.catalog, key) for layer in stack.layers))
        per_layer = run_layer_stack(items, stack, allowed=allowed, trace=trace)
        out[key] = [r.with_context(key, "H") for results in per_layer for r in results]
    return out


def ml_fuse(results: Sequence[RecognitionResult]) -> RecognitionResult:
    """Maximum-likelihood pick; ties go to the earliest span start, then the smaller label."""
    if not results:
        raise ValueError("nothing to fuse")
    return min(results, key=lambda r: (-r.log_likelihood, r.span[0], r.label))
