import re

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+|(?<=[。！？])")


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace + punctuation split."""
    return _TOKEN.findall(text.lower())


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENT_SPLIT.split(text.strip()) if s.strip()]
