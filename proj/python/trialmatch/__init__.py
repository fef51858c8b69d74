"""Patient-to-trial matching: hybrid retrieval, criterion matching, ranking and evaluation."""

from ._core import (
    ConfigError,
    MissingInput,
    TrialmatchError,
    auroc,
    bm25,
    combine,
    fuse,
    ndcg_at_k,
    parse_matching_response,
    precision_at_k,
    recall_at_k,
    run_pipeline,
    synth,
)

__all__ = [
    "ConfigError",
    "MissingInput",
    "TrialmatchError",
    "auroc",
    "bm25",
    "combine",
    "fuse",
    "ndcg_at_k",
    "parse_matching_response",
    "precision_at_k",
    "recall_at_k",
    "run_pipeline",
    "synth",
]
