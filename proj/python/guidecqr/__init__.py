"""Python bindings for the guidecqr conversational query reformulation pipeline."""
import json

from ._core import (
    CorpusIndex,
    Error,
    HttpError,
    ParseError,
    PipelineConfig,
    PreconditionError,
    ProtocolError,
    cmd_index,
    cmd_reformulate,
    cmd_sweep,
    cosine,
    embed,
    filter_score,
    history_score,
    mrr,
    ndcg,
    query_score,
    split_sentences,
    tokenize,
)
from ._core import cmd_evaluate_json as _cmd_evaluate_json


def cmd_evaluate(config, run=None, baseline=None):
    """Scores run files against the configured qrels and returns the metrics dict."""
    return json.loads(_cmd_evaluate_json(config, run, baseline))


__all__ = [
    "CorpusIndex",
    "Error",
    "HttpError",
    "ParseError",
    "PipelineConfig",
    "PreconditionError",
    "ProtocolError",
    "cmd_evaluate",
    "cmd_index",
    "cmd_reformulate",
    "cmd_sweep",
    "cosine",
    "embed",
    "filter_score",
    "history_score",
    "mrr",
    "ndcg",
    "query_score",
    "split_sentences",
    "tokenize",
]
