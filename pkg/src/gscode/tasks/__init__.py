from .instances import (
    MAX_NODES,
    MAX_TARGET_WORDS,
    REPR_AST,
    REPR_AUGAST,
    REPRS,
    TASK_FITB,
    TASK_VARNAMING,
    FitbInstance,
    VarNamingInstance,
    make_fitb_instances,
    make_varnaming_instances,
    read_instances,
    truncate_graph,
    write_instances,
)
from .metrics import MetricsReport, fitb_metrics, levenshtein, varnaming_metrics
from .readout import (
    DECODE_STEPS,
    DECODERS,
    MIX_NORMALIZED,
    MIX_PAPER_LITERAL,
    MIXTURES,
    FitbReadout,
    NameDecoder,
    beam_search,
    decode_greedy,
    fitb_loss,
    fitb_predict,
    teacher_distributions,
    varnaming_loss,
)

__all__ = [
    "MAX_NODES",
    "MAX_TARGET_WORDS",
    "REPR_AST",
    "REPR_AUGAST",
    "REPRS",
    "TASK_FITB",
    "TASK_VARNAMING",
    "FitbInstance",
    "VarNamingInstance",
    "make_fitb_instances",
    "make_varnaming_instances",
    "read_instances",
    "truncate_graph",
    "write_instances",
    "MetricsReport",
    "fitb_metrics",
    "levenshtein",
    "varnaming_metrics",
    "DECODE_STEPS",
    "DECODERS",
    "MIX_NORMALIZED",
    "MIX_PAPER_LITERAL",
    "MIXTURES",
    "FitbReadout",
    "NameDecoder",
    "beam_search",
    "decode_greedy",
    "fitb_loss",
    "fitb_predict",
    "teacher_distributions",
    "varnaming_loss",
]
