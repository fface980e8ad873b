from .dates import DateScore, date_f1, extract_dates
from .rouge import PRF, RougeScore, lcs_length, ngrams, rouge, rouge_l, rouge_n

__all__ = [
    "PRF",
    "DateScore",
    "RougeScore",
    "date_f1",
    "extract_dates",
    "lcs_length",
    "ngrams",
    "rouge",
    "rouge_l",
    "rouge_n",
]
