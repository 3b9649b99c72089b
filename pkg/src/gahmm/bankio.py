"""Plain-text persistence for layered model banks.

Layout (one item per line, floats at 17 significant digits)::

    gahmm-bank 1
    layers <K>
    layer <k>
    vocab-digest <sha256>
    alpha <a>
    beta <b>
    vocab <M>
    <name> x M
    model per_class <label> | model label_state
    states <N>
    <state label> x N
    A / B / pi, each followed by its rows
    end
"""

from __future__ import annotations

from typing import Iterator, Sequence, TextIO

import numpy as np

from gahmm.events import Vocabulary
from gahmm.hmm import HmmModel, ModelBank

FORMAT = "gahmm-bank"
VERSION = 1


class BankFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_model(out: list[str], model: HmmModel):
    out.append(f"states {model.N}")
    out.extend(model.state_labels)
    for name, m in (("A", model.A), ("B", model.B), ("pi", model.pi[None, :])):
        out.append(name)
        out.extend(" ".join(_fmt(v) for v in row) for row in m)


def dumps_banks(banks: Sequence[ModelBank]) -> str:
    out = [f"{FORMAT} {VERSION}", f"layers {len(banks)}"]
    for k, bank in enumerate(banks):
        out.append(f"layer {k}")
        out.append(f"vocab-digest {Vocabulary(bank.vocab_names[1:]).digest()}")
        out.append(f"alpha {_fmt(bank.alpha)}")
        out.append(f"beta {_fmt(bank.beta)}")
        out.append(f"vocab {len(bank.vocab_names)}")
        out.extend(bank.vocab_names)
        for label, model in bank.per_class.items():
            out.append(f"model per_class {label}")
            _write_model(out, model)
        out.append("model label_state")
        _write_model(out, bank.label_state)
    out.append("end")
    return "\n".join(out) + "\n"


class _Lines:
    def __init__(self, text: str):
        self._it: Iterator[tuple[int, str]] = enumerate(text.split("\n"), start=1)
        self.lineno = 0

    def next(self) -> str:
        try:
            self.lineno, line = next(self._it)
        except StopIteration:
            raise BankFormatError("unexpected end of bank file") from None
        return line

    def keyword(self, key: str) -> str:
        line = self.next()
        head, _, rest = line.partition(" ")
        if head != key:
            raise BankFormatError(f"line {self.lineno}: expected '{key}', got {line!r}")
        return rest

    def rows(self, count: int) -> np.ndarray:
        try:
            return np.array([[float(v) for v in self.next().split()] for _ in range(count)])
        except ValueError as exc:
            raise BankFormatError(f"line {self.lineno}: {exc}") from None


def _read_model(lines: _Lines) -> HmmModel:
    n = int(lines.keyword("states"))
    labels = tuple(lines.next() for _ in range(n))
    lines.keyword("A")
    A = lines.rows(n)
    lines.keyword("B")
    B = lines.rows(n)
    lines.keyword("pi")
    pi = lines.rows(1)[0]
    return HmmModel(A, B, pi, labels)


def loads_banks(text: str) -> tuple[list[ModelBank], list[str]]:
    """Parse bank text; returns the banks and their recorded vocabulary digests."""
    lines = _Lines(text)
    header = lines.next().split()
    if header != [FORMAT, str(VERSION)]:
        raise BankFormatError(f"not a {FORMAT} v{VERSION} file")
    banks, digests = [], []
    for k in range(int(lines.keyword("layers"))):
        if int(lines.keyword("layer")) != k:
            raise BankFormatError(f"line {lines.lineno}: layers out of order")
        digests.append(lines.keyword("vocab-digest"))
        alpha = float(lines.keyword("alpha"))
        beta = float(lines.keyword("beta"))
        names = tuple(lines.next() for _ in range(int(lines.keyword("vocab"))))
        per_class: dict[str, HmmModel] = {}
        while True:
            kind = lines.keyword("model")
            if kind == "label_state":
                label_state = _read_model(lines)
                break
            if not kind.startswith("per_class "):
                raise BankFormatError(f"line {lines.lineno}: unknown model kind {kind!r}")
            per_class[kind[len("per_class "):]] = _read_model(lines)
        banks.append(ModelBank(per_class, label_state, alpha, beta, names))
    lines.keyword("end")
    return banks, digests


def save_banks(banks: Sequence[ModelBank], fh: TextIO):
    fh.write(dumps_banks(banks))


def load_banks(fh: TextIO) -> tuple[list[ModelBank], list[str]]:
    return loads_banks(fh.read())
