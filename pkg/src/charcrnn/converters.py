"""Adapters from native corpus layouts to the canonical TSV format.

Three real-world formats are supported: question-classification files
(`COARSE:fine question ...` per line), newsgroup directory trees (one
subdirectory per group, one message per file), and part-of-speech
tagged category files (`word/tag` tokens, one sentence per line).

Because the original corpora cannot be bundled, this module also ships
deterministic synthetic generators that emit the same native formats
with matching class counts and length statistics. Their text is
pseudo-word filler with per-class signature tokens, so classifiers can
genuinely learn from them, but the content is meaningless; everything
they produce is labeled synthetic.
"""

from pathlib import Path

from .corpus import CorpusError, LabeledCorpus
from .rng import named_rng

# ---------------------------------------------------------------------------
# native-format readers


def trec_records(lines):
    """Parse `LABEL:fine text...` question lines into (label, text) pairs."""
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        label, _, text = line.partition(" ")
        if ":" not in label:
            raise CorpusError(f"question line {lineno}: label {label!r} has no COARSE:fine form")
        records.append((label, text.strip()))
    return records


def newsgroups_records(root):
    """One record per message file under root/<group>/<file>."""
    root = Path(root)
    records = []
    for group_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for message in sorted(group_dir.iterdir()):
            if not message.is_file():
                continue
            text = message.read_bytes().decode("latin-1")
            records.append((group_dir.name, text))
    if not records:
        raise CorpusError(f"{root}: no group directories with messages")
    return records


BROWN_CATEGORIES = {
    "a": "news",
    "b": "editorial",
    "c": "reviews",
    "d": "religion",
    "e": "hobbies",
    "f": "lore",
    "g": "belles_lettres",
    "h": "government",
    "j": "learned",
    "k": "fiction",
    "l": "mystery",
    "m": "science_fiction",
    "n": "adventure",
    "p": "romance",
    "r": "humor",
}


def brown_records(root):
    """One record per tagged sentence; category from the file-name prefix."""
    root = Path(root)
    records = []
    for path in sorted(root.iterdir()):
        name = path.name
        if len(name) < 2 or not name.startswith("c") or name[1] not in BROWN_CATEGORIES:
            continue
        category = BROWN_CATEGORIES[name[1]]
        for line in path.read_text("latin-1").splitlines():
            line = line.strip()
            if not line:
                continue
            words = [tok.rsplit("/", 1)[0] for tok in line.split()]
            records.append((category, " ".join(words)))
    if not records:
        raise CorpusError(f"{root}: no category files found")
    return records


def write_tsv(records, path):
    """Write (label, text) pairs as TSV; tabs and newlines become spaces."""
    def clean(s):
        return s.replace("\t", " ").replace("\n", " ").replace("\r", " ")

    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for label, text in records:
            f.write(f"{clean(label)}\t{clean(text)}\n")
    return path


# ---------------------------------------------------------------------------
# synthetic generators

_SYLLABLES = (
    "ba", "co", "da", "fen", "gor", "hal", "jin", "kel", "lom", "mer",
    "nex", "pol", "qua", "ril", "sa", "tun", "vor", "wex", "yam", "zeb",
)

_FILLERS = (
    "of", "the", "in", "a", "for", "on", "to", "about", "from", "with",
    "name", "first", "most", "best", "new", "old", "long", "many",
)

QC_LABELS = (
    "ABBR:abb", "ABBR:exp",
    "DESC:def", "DESC:desc", "DESC:manner", "DESC:reason",
    "ENTY:animal", "ENTY:body", "ENTY:color", "ENTY:cremat", "ENTY:currency",
    "ENTY:dismed", "ENTY:event", "ENTY:food", "ENTY:instru", "ENTY:lang",
    "ENTY:letter", "ENTY:other", "ENTY:plant", "ENTY:product", "ENTY:religion",
    "ENTY:sport", "ENTY:substance", "ENTY:symbol", "ENTY:techmeth", "ENTY:termeq",
    "ENTY:veh", "ENTY:word",
    "HUM:desc", "HUM:gr", "HUM:ind", "HUM:title",
    "LOC:city", "LOC:country", "LOC:mount", "LOC:other", "LOC:state",
    "NUM:code", "NUM:count", "NUM:date", "NUM:dist", "NUM:money",
    "NUM:ord", "NUM:other", "NUM:perc", "NUM:period", "NUM:speed",
    "NUM:temp", "NUM:volsize", "NUM:weight",
)

_QC_HEADS = {
    "ABBR": ("what",),
    "DESC": ("how", "why", "what"),
    "ENTY": ("what", "which"),
    "HUM": ("who",),
    "LOC": ("where", "what"),
    "NUM": ("how", "when"),
}

# Token-length cycle with mean 5.4, matching the question corpus.
_QC_LENGTHS = (4, 5, 5, 5, 5, 6, 6, 6, 6, 6)

QC_SIZE = 5952


def _pseudo_word(rng, min_syllables=2, max_syllables=3):
    count = int(rng.integers(min_syllables, max_syllables + 1))
    return "".join(_SYLLABLES[int(rng.integers(len(_SYLLABLES)))] for _ in range(count))


def _class_lexicon(rng, signature_words=2, support_words=3):
    signature = [_pseudo_word(rng) for _ in range(signature_words)]
    support = [_pseudo_word(rng, 1, 2) for _ in range(support_words)]
    return signature, support


def synthetic_qc_lines(seed=7):
    """5952 synthetic questions over the 50 fine question labels.

    Each class carries its own signature pseudo-words so the corpus is
    learnable; lengths cycle so the mean token count lands near 5.4.
    """
    rng = named_rng(seed, "synthetic-qc")
    lexicons = {label: _class_lexicon(rng) for label in QC_LABELS}
    per_class = QC_SIZE // len(QC_LABELS)
    extra = QC_SIZE - per_class * len(QC_LABELS)
    labels = []
    for i, label in enumerate(QC_LABELS):
        labels.extend([label] * (per_class + (1 if i < extra else 0)))
    order = rng.permutation(len(labels))

    lines = []
    for row, pick in enumerate(order):
        label = labels[pick]
        coarse = label.split(":")[0]
        signature, support = lexicons[label]
        heads = _QC_HEADS[coarse]
        length = _QC_LENGTHS[row % len(_QC_LENGTHS)]
        tokens = [heads[int(rng.integers(len(heads)))], signature[0]]
        while len(tokens) < length - 1:
            roll = rng.random()
            if roll < 0.35:
                tokens.append(signature[int(rng.integers(len(signature)))])
            elif roll < 0.6:
                tokens.append(support[int(rng.integers(len(support)))])
            else:
                tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
        tokens = tokens[: length - 1]
        tokens.append("?")
        lines.append(f"{label} {' '.join(tokens)}")
    return lines


def synthetic_qc_tsv(path, seed=7):
    """Generate the synthetic question corpus and convert it to TSV."""
    return write_tsv(trec_records(synthetic_qc_lines(seed)), path)


_BROWN_TAGS = ("at", "nn", "vbd", "jj", "in", "np", "rb", "cc", "nns", "vbn")


def synthetic_brown_tree(root, seed=7, sentences_per_file=30, files_per_category=2):
    """Write a synthetic tagged-category tree under `root`; returns the paths."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = named_rng(seed, "synthetic-brown")
    paths = []
    for letter in sorted(BROWN_CATEGORIES):
        signature, support = _class_lexicon(rng)
        for file_no in range(1, files_per_category + 1):
            lines = []
            for _ in range(sentences_per_file):
                length = int(rng.integers(12, 22))
                words = []
                for _ in range(length):
                    roll = rng.random()
                    if roll < 0.2:
                        words.append(signature[int(rng.integers(len(signature)))])
                    elif roll < 0.4:
                        words.append(support[int(rng.integers(len(support)))])
                    else:
                        words.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
                tagged = [f"{w}/{_BROWN_TAGS[int(rng.integers(len(_BROWN_TAGS)))]}" for w in words]
                tagged.append("./.")
                lines.append(" ".join(tagged))
            path = root / f"c{letter}{file_no:02d}"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            paths.append(path)
    return paths


GNEWS_CLASSES = 55
GNEWS_SIZE = 2066

# Length cycle with mean 24, matching the news-cluster corpus statistics.
_GNEWS_LENGTHS = (20, 22, 24, 26, 28)


def synthetic_gnews_records(seed=7):
    """~2066 synthetic news snippets over 55 classes, mean length near 24."""
    rng = named_rng(seed, "synthetic-gnews")
    class_names = [f"story-{i:02d}" for i in range(GNEWS_CLASSES)]
    lexicons = {name: _class_lexicon(rng, 3, 4) for name in class_names}
    per_class = GNEWS_SIZE // GNEWS_CLASSES
    extra = GNEWS_SIZE - per_class * GNEWS_CLASSES
    labels = []
    for i, name in enumerate(class_names):
        labels.extend([name] * (per_class + (1 if i < extra else 0)))
    order = rng.permutation(len(labels))

    records = []
    for row, pick in enumerate(order):
        label = labels[pick]
        signature, support = lexicons[label]
        length = _GNEWS_LENGTHS[row % len(_GNEWS_LENGTHS)]
        tokens = []
        for _ in range(length):
            roll = rng.random()
            if roll < 0.3:
                tokens.append(signature[int(rng.integers(len(signature)))])
            elif roll < 0.5:
                tokens.append(support[int(rng.integers(len(support)))])
            else:
                tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
        records.append((label, " ".join(tokens)))
    return records


def motif_corpus(samples=20, text_len=36, seed=11):
    """Tiny two-class corpus separable by disjoint character motifs."""
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    rng = named_rng(seed, "motif")
    motifs = ("vzqvk", "xjwxm")
    filler = "aeilnorst"
    records = []
    for i in range(samples):
        cls = i % 2
        motif = motifs[cls]
        chars = [filler[int(rng.integers(len(filler)))] for _ in range(text_len)]
        half = text_len // 2
        first = int(rng.integers(0, half - len(motif)))
        second = int(rng.integers(half, text_len - len(motif)))
        for start in (first, second):
            chars[start : start + len(motif)] = motif
        records.append((f"motif-{cls}", "".join(chars)))
    return LabeledCorpus.from_records(records, name="motif-synthetic")
