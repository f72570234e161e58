"""Change-impact file ranking."""

from ._impactrank import (
    AttentionModel,
    CombineMode,
    DataError,
    UsageError,
    attention_coverage,
    combine_scores,
    evaluate,
    explain,
    extract_keywords,
    index,
    main,
    mrr,
    pagerank,
    rank,
    recall_at_k,
    reciprocal_rank,
    tokenize,
    train,
)

__all__ = [
    "AttentionModel",
    "CombineMode",
    "DataError",
    "UsageError",
    "attention_coverage",
    "combine_scores",
    "evaluate",
    "explain",
    "extract_keywords",
    "index",
    "main",
    "mrr",
    "pagerank",
    "rank",
    "recall_at_k",
    "reciprocal_rank",
    "tokenize",
    "train",
]
