from .io import (
    CorpusError,
    build_vocab,
    encode,
    event_budgets,
    load_corpus,
    parse_record,
    read_corpus,
    to_record,
    truncate,
    write_corpus,
    write_records,
)
from .oracle import exhaustive_oracle, greedy_oracle, make_oracle_labels, subset_score
from .synth import GrammarConfig, generate_synthetic
from .text import split_sentences, tokenize
from .types import Event, TimelineExample, TruncationPolicy
from .vocab import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocab

__all__ = [
    "BOS_ID",
    "EOS_ID",
    "PAD_ID",
    "UNK_ID",
    "CorpusError",
    "Event",
    "GrammarConfig",
    "TimelineExample",
    "TruncationPolicy",
    "Vocab",
    "build_vocab",
    "encode",
    "event_budgets",
    "exhaustive_oracle",
    "generate_synthetic",
    "greedy_oracle",
    "load_corpus",
    "make_oracle_labels",
    "parse_record",
    "read_corpus",
    "split_sentences",
    "subset_score",
    "to_record",
    "tokenize",
    "truncate",
    "write_corpus",
    "write_records",
]
