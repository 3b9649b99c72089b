"""Run configuration files.

A config is a TOML document::

    architecture = "H"            # N, C or H
    alpha = 0.1                   # smoothing used by `train`
    beta = 0.6
    context_mode = "per_entity"   # or "by_tag" (H only)
    contexts = ["indoor"]         # tags to recognize under, by_tag only
    output = "json"               # or "table"
    fuse = false                  # emit only the maximum-likelihood result per context/layer

    [aliases]                     # token renames applied while reading events
    H2_H3_Hand_shaking = "H2_H3_Handshaking"

    [[layer]]                     # one table per layer, bottom first
    catalogs = ["table1.onto"]    # merged; paths relative to this file
    architecture = "C"            # per-layer override (N or C)
    window = "sliding"            # fixed | flooring | sliding
    floor = "uniform"             # "uniform", "inf" or a number
    min_confidence = 0.0
    decoder = "per_class"         # or "label_state"
    max_passes = 10
    confidence_floor = 0.0
    trivial = []
    collapse_repeats = true
    correlation = false
    correlation_threshold = 0.5   # default: the catalog's base pair weight

    [[layer.frequency]]
    a = "Object_Removed"
    b = "Object_Placed"
    label_a = "Loading"
    label_b = "Unloading"
    min_margin = 2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from gahmm.hmm import DEFAULT_ALPHA, DEFAULT_BETA, ModelBank, build_model_bank
from gahmm.ontology import Catalog, parse_catalog
from gahmm.pipelines import ConfigError, Layer, LayerStack
from gahmm.windowing import FilterConfig, FrequencyRule, WindowCase, WindowingPolicy

_TOP_KEYS = {"architecture", "alpha", "beta", "context_mode", "contexts", "output", "fuse",
             "aliases", "layer"}
_LAYER_KEYS = {"catalogs", "architecture", "window", "floor", "min_confidence", "decoder",
               "max_passes", "confidence_floor", "trivial", "collapse_repeats", "correlation",
               "correlation_threshold", "frequency"}


@dataclass
class LayerSpec:
    catalogs: list[Path]
    architecture: str | None = None
    window: WindowCase = WindowCase.SLIDING
    floor: float | None = None
    min_confidence: float = 0.0
    decoder: str = "per_class"
    max_passes: int = 10
    filters: FilterConfig = field(default_factory=FilterConfig)


@dataclass
class RunConfig:
    layers: list[LayerSpec]
    architecture: str = "C"
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    context_mode: str = "per_entity"
    contexts: list[str] | None = None
    output: str = "json"
    fuse: bool = False
    aliases: dict[str, str] = field(default_factory=dict)

    def layer_architecture(self, spec: LayerSpec) -> str:
        if spec.architecture:
            return spec.architecture
        return "N" if self.architecture == "N" else "C"

    def load_catalogs(self) -> list[Catalog]:
        return [load_catalog_files(spec.catalogs) for spec in self.layers]

    def build_stack(self, banks: Sequence[ModelBank] | None = None) -> LayerStack:
        catalogs = self.load_catalogs()
        if banks is not None and len(banks) != len(catalogs):
            raise ConfigError(f"bank has {len(banks)} layers, config has {len(catalogs)}")
        layers = []
        for k, (spec, cat) in enumerate(zip(self.layers, catalogs)):
            bank = banks[k] if banks is not None else build_model_bank(cat, self.alpha, self.beta)
            layers.append(Layer(
                cat, bank, WindowingPolicy(spec.window, cat.window), spec.filters,
                self.layer_architecture(spec), spec.floor, spec.min_confidence, spec.decoder,
                spec.max_passes, self.alpha))
        return LayerStack(layers)


def load_catalog_files(paths: Sequence[Path]) -> Catalog:
    if not paths:
        raise ConfigError("a layer needs at least one catalog file")
    catalogs = [parse_catalog(Path(p).read_text(encoding="utf-8")) for p in paths]
    return catalogs[0].merge(*catalogs[1:])


def _floor(value: Any) -> float | None:
    if value is None or value == "uniform":
        return None
    if value == "inf":
        return math.inf
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"floor must be 'uniform', 'inf' or a number, got {value!r}")


def _check_keys(table: dict, allowed: set[str], where: str):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


def _layer(table: dict, base: Path) -> LayerSpec:
    _check_keys(table, _LAYER_KEYS, "layer")
    catalogs = table.get("catalogs")
    if isinstance(catalogs, str):
        catalogs = [catalogs]
    if not catalogs:
        raise ConfigError("each [[layer]] needs a catalogs list")
    paths = [(base / c).resolve() for c in catalogs]
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"catalog file not found: {p}")
    arch = table.get("architecture")
    if arch is not None and arch not in ("N", "C"):
        raise ConfigError(f"layer architecture must be N or C, got {arch!r}")
    try:
        rules = tuple(FrequencyRule(r["a"], r["b"], r["label_a"], r["label_b"], int(r.get("min_margin", 1)))
                      for r in table.get("frequency", []))
        filters = FilterConfig(
            confidence_floor=float(table.get("confidence_floor", 0.0)),
            trivial_symbols=frozenset(table.get("trivial", [])),
            correlation=bool(table.get("correlation", False)),
            correlation_threshold=table.get("correlation_threshold"),
            frequency_rules=rules,
            collapse_repeats=bool(table.get("collapse_repeats", True)),
        )
        window = WindowCase.parse(table.get("window", "sliding"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad layer settings: {exc}") from None
    return LayerSpec(paths, arch, window, _floor(table.get("floor")),
                     float(table.get("min_confidence", 0.0)), table.get("decoder", "per_class"),
                     int(table.get("max_passes", 10)), filters)


def parse_config(text: str, base: Path = Path(".")) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    _check_keys(data, _TOP_KEYS, "top-level")
    layers = [_layer(t, base) for t in data.get("layer", [])]
    if not layers:
        raise ConfigError("config defines no [[layer]]")
    cfg = RunConfig(
        layers=layers,
        architecture=data.get("architecture", "C"),
        alpha=float(data.get("alpha", DEFAULT_ALPHA)),
        beta=float(data.get("beta", DEFAULT_BETA)),
        context_mode=data.get("context_mode", "per_entity"),
        contexts=data.get("contexts"),
        output=data.get("output", "json"),
        fuse=bool(data.get("fuse", False)),
        aliases=dict(data.get("aliases", {})),
    )
    if cfg.architecture not in ("N", "C", "H"):
        raise ConfigError(f"architecture must be N, C or H, got {cfg.architecture!r}")
    if cfg.context_mode not in ("per_entity", "by_tag"):
        raise ConfigError(f"unknown context_mode {cfg.context_mode!r}")
    if cfg.output not in ("json", "table"):
        raise ConfigError(f"unknown output format {cfg.output!r}")
    if cfg.alpha <= 0:
        raise ConfigError("alpha must be positive")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
