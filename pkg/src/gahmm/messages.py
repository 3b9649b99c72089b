"""Semantic messages: the JSON form of a recognition.

Each message is one JSON object per line with keys, in this order:

    activity       recognized label
    token          label as it re-enters the stream (entity-prefixed in generic catalogs)
    participants   entity IDs of the contributing events, first-seen order
    objects        object IDs of the contributing events, first-seen order
    span           [start, end) indices into the input event stream
    time_span      [first, last] timestamps of the contributing events
    confidence     exp(log_likelihood - best achievable log-likelihood for the label), in (0, 1]
    log_likelihood forward log-likelihood of the recognized window
    layer          0-based layer index
    architecture   "N", "C" or "H"
    context        context key (H only) or null
    kind           "window" or "frequency"
    provenance     filters and substitutions involved
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from gahmm.events import ObservationEvent
from gahmm.pipelines import RecognitionResult


@dataclass(frozen=True)
class SemanticMessage:
    activity: str
    token: str
    participants: tuple[str, ...]
    objects: tuple[str, ...]
    span: tuple[int, int]
    time_span: tuple[int, int]
    confidence: float
    log_likelihood: float
    layer: int
    architecture: str
    context: str | None
    kind: str
    provenance: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps({
            "activity": self.activity,
            "token": self.token,
            "participants": list(self.participants),
            "objects": list(self.objects),
            "span": list(self.span),
            "time_span": list(self.time_span),
            "confidence": self.confidence,
            "log_likelihood": self.log_likelihood,
            "layer": self.layer,
            "architecture": self.architecture,
            "context": self.context,
            "kind": self.kind,
            "provenance": list(self.provenance),
        }, ensure_ascii=False)


def message_sort_key(r: RecognitionResult):
    return (r.span, r.layer, r.context or "", r.kind, r.label)


def to_message(result: RecognitionResult, events: Sequence[ObservationEvent]) -> SemanticMessage:
    contributing = [events[i] for i in result.sources] or list(events[result.span[0]:result.span[1]])
    people: list[str] = []
    things: list[str] = []
    for e in contributing:
        people.extend(x for x in e.entity_ids if x not in people)
        things.extend(x for x in e.object_ids if x not in things)
    stamps = [e.timestamp for e in contributing]
    return SemanticMessage(
        result.label, result.token or result.label, tuple(people), tuple(things), result.span,
        (min(stamps), max(stamps)), result.confidence, result.log_likelihood, result.layer,
        result.architecture, result.context, result.kind, result.provenance)
