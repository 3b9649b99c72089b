"""Ontology-trained discrete HMMs for activity and group-activity recognition."""

from gahmm.events import (
    ObservationEvent,
    ObservationSymbol,
    ParseError,
    Vocabulary,
    encode,
    format_event_stream,
    parse_event_stream,
    strip_ids,
)
from gahmm.hmm import (
    HmmModel,
    ModelBank,
    baum_welch,
    build_model_bank,
    forward_log_likelihood,
    score_all,
    viterbi,
)
from gahmm.ontology import (
    Catalog,
    CatalogError,
    OntologyEntry,
    PairWeightTable,
    build_pair_weights,
    correlation_wt,
    parse_catalog,
    render_catalog,
)
from gahmm.pipelines import (
    ContextPartition,
    Layer,
    LayerStack,
    RecognitionResult,
    ml_fuse,
    partition_contexts,
    run_chmm,
    run_hhmm,
    run_layer_stack,
    run_nhmm,
)
from gahmm.windowing import (
    FilterConfig,
    FrequencyRule,
    Window,
    WindowCase,
    WindowingPolicy,
    correlation_select,
    filter_confidence,
    filter_trivial,
    frequency_disparity,
    generate_windows,
)

__version__ = "0.1.0"
