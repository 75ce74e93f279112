"""Labeled-corpus ingestion, statistics, filtering, and seeded splits.

The canonical interchange format is UTF-8 TSV, one `label<TAB>text`
record per line. Class ids are dense integers assigned in first
appearance order; splits share the parent's label index so ids stay
stable across train and test.
"""

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .rng import named_rng


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid corpus operations."""


@dataclass
class LabeledCorpus:
    records: list  # of (label, text) pairs
    label_index: dict  # label -> dense class id
    name: str = "corpus"

    def __post_init__(self):
        ids = sorted(self.label_index.values())
        if ids != list(range(len(ids))):
            raise CorpusError(f"{self.name}: class ids are not dense in [0, C)")
        for label, _ in self.records:
            if not label:
                raise CorpusError(f"{self.name}: empty label")
            if label not in self.label_index:
                raise CorpusError(f"{self.name}: label {label!r} missing from index")

    @classmethod
    def from_records(cls, records, name="corpus"):
        index = {}
        for label, _ in records:
            if label not in index:
                index[label] = len(index)
        return cls(records=list(records), label_index=index, name=name)

    def __len__(self):
        return len(self.records)

    @property
    def class_count(self):
        return len(self.label_index)

    def class_id(self, label):
        return self.label_index[label]

    def class_ids(self):
        """Dense class id per record, in record order."""
        return [self.label_index[label] for label, _ in self.records]

    def subset(self, indices, name):
        picked = [self.records[i] for i in indices]
        return LabeledCorpus(records=picked, label_index=self.label_index, name=name)


def load_corpus(path):
    """Read a TSV corpus; blank lines are skipped, labels indexed in order."""
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            label, tab, text = line.partition("\t")
            if not tab:
                raise CorpusError(f"{path}:{lineno}: expected label<TAB>text")
            if not label:
                raise CorpusError(f"{path}:{lineno}: empty label")
            records.append((label, text))
    if not records:
        raise CorpusError(f"{path}: corpus has no records")
    return LabeledCorpus.from_records(records, name=path.stem)


@dataclass
class CorpusStats:
    name: str
    size: int
    vocabulary: int
    total_words: int
    mst: float
    classes: int


def _tokenize(text):
    return text.lower().split()


def stats(corpus):
    """Size, vocabulary, token totals, and mean sentence length in tokens."""
    if len(corpus) == 0:
        raise CorpusError(f"{corpus.name}: cannot compute stats of an empty corpus")
    vocab = set()
    total = 0
    for _, text in corpus.records:
        tokens = _tokenize(text)
        vocab.update(tokens)
        total += len(tokens)
    size = len(corpus)
    return CorpusStats(
        name=corpus.name,
        size=size,
        vocabulary=len(vocab),
        total_words=total,
        mst=total / size,
        classes=corpus.class_count,
    )


def filter_corpus(corpus, min_freq=10, max_len=500):
    """Truncate records to max_len tokens, then drop corpus-rare tokens.

    Frequencies are counted over the truncated corpus (lowercased), so
    applying the same filter twice changes nothing. min_freq <= 1 with
    max_len None is the identity. Meant for the bag-of-words path; the
    character path needs only the length cap.
    """
    if min_freq <= 1 and max_len is None:
        return corpus
    truncated = []
    for label, text in corpus.records:
        tokens = text.split()
        if max_len is not None and len(tokens) > max_len:
            tokens = tokens[:max_len]
        truncated.append((label, tokens))
    kept_records = []
    if min_freq > 1:
        freq = Counter()
        for _, tokens in truncated:
            freq.update(tok.lower() for tok in tokens)
        for label, tokens in truncated:
            kept = [tok for tok in tokens if freq[tok.lower()] >= min_freq]
            kept_records.append((label, " ".join(kept)))
    else:
        kept_records = [(label, " ".join(tokens)) for label, tokens in truncated]
    return LabeledCorpus(
        records=kept_records, label_index=corpus.label_index, name=corpus.name
    )


@dataclass
class SplitPlan:
    train_count: int
    test_count: int
    batch_size: int
    seed: int = 0

    def validate(self, corpus_size=None):
        if self.train_count <= 0 or self.test_count <= 0:
            raise CorpusError(
                f"split counts must be positive, got {self.train_count}/{self.test_count}"
            )
        if self.batch_size < 1:
            raise CorpusError(f"batch_size must be at least 1, got {self.batch_size}")
        if corpus_size is not None and self.train_count + self.test_count > corpus_size:
            raise CorpusError(
                f"split needs {self.train_count}+{self.test_count} records "
                f"but the corpus has {corpus_size}"
            )
        return self


def split(corpus, plan):
    """Seeded shuffle, then the first train_count / next test_count records."""
    plan.validate(len(corpus))
    order = named_rng(plan.seed, "split").permutation(len(corpus))
    train_idx = order[: plan.train_count]
    test_idx = order[plan.train_count : plan.train_count + plan.test_count]
    return (
        corpus.subset(train_idx, f"{corpus.name}-train"),
        corpus.subset(test_idx, f"{corpus.name}-test"),
    )


STATS_CSV_HEADER = "name,size,vocabulary,total_words,mst,classes"


def stats_csv(rows):
    lines = [STATS_CSV_HEADER]
    for s in rows:
        lines.append(f"{s.name},{s.size},{s.vocabulary},{s.total_words},{s.mst:.4f},{s.classes}")
    return "\n".join(lines)


def stats_table(rows):
    header = ("name", "size", "vocabulary", "total_words", "mst", "classes")
    body = [
        (s.name, str(s.size), str(s.vocabulary), str(s.total_words), f"{s.mst:.4f}", str(s.classes))
        for s in rows
    ]
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header)]
    lines.extend(fmt.format(*row) for row in body)
    return "\n".join(lines)
