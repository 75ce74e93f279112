"""Macro precision/recall/F1 evaluation, a KNN baseline, and cell timing.

Macro averaging weights every class equally (the unweighted mean of
per-class scores); classes that never appear in the test labels are
excluded from the mean so recall stays defined. This choice changes
absolute numbers versus micro averaging and is therefore stated here
and in the CSV output rather than left implicit.
"""

import hashlib
import math
import time
import warnings
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .model import init_params, predict_batch
from .model import loss as batch_loss
from .rng import named_rng
from .tensor import Tape, backward, zero_grads
from .train import AdamState, adam_step, clip_gradients, encode_corpus


@dataclass
class ConfusionCounts:
    """Per-class true-positive / false-positive / false-negative tallies."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def empty(cls, n_classes):
        if n_classes < 1:
            raise ValueError(f"need at least one class, got {n_classes}")
        return cls(
            tp=np.zeros(n_classes, dtype=np.int64),
            fp=np.zeros(n_classes, dtype=np.int64),
            fn=np.zeros(n_classes, dtype=np.int64),
        )

    @property
    def n_classes(self):
        return self.tp.shape[0]

    @property
    def samples(self):
        return int(self.tp.sum() + self.fn.sum())

    def add(self, true_label, predicted):
        if not 0 <= true_label < self.n_classes:
            raise ValueError(f"true label {true_label} out of range")
        if true_label == predicted:
            self.tp[true_label] += 1
        else:
            self.fn[true_label] += 1
            if 0 <= predicted < self.n_classes:
                self.fp[predicted] += 1

    @classmethod
    def from_pairs(cls, true_labels, predicted, n_classes):
        counts = cls.empty(n_classes)
        for t, p in zip(true_labels, predicted, strict=True):
            counts.add(int(t), int(p))
        return counts


@dataclass
class MetricsReport:
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: list  # (precision, recall, f1) per class id
    evaluated_classes: list  # class ids included in the macro mean


def metrics_from_counts(counts):
    """Macro scores over classes present in the test labels (tp+fn > 0)."""
    per_class = []
    present = []
    for c in range(counts.n_classes):
        tp, fp, fn = int(counts.tp[c]), int(counts.fp[c]), int(counts.fn[c])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class.append((precision, recall, f1))
        if tp + fn > 0:
            present.append(c)
    if not present:
        raise ValueError("no classes present in the evaluated labels")
    macro = [
        sum(per_class[c][i] for c in present) / len(present) for i in range(3)
    ]
    return MetricsReport(
        macro_precision=macro[0],
        macro_recall=macro[1],
        macro_f1=macro[2],
        per_class=per_class,
        evaluated_classes=present,
    )


def evaluate_predictions(true_labels, predicted, n_classes):
    return metrics_from_counts(ConfusionCounts.from_pairs(true_labels, predicted, n_classes))


def evaluate(config, params, test, encoded=None, chunk_size=256):
    """Predict every test record and reduce to a MetricsReport.

    `encoded` short-circuits re-encoding when the caller already holds
    the CharMatrix list for `test` (the training loop does).
    """
    if len(test) == 0:
        raise ValueError("evaluate needs a non-empty test corpus")
    if encoded is None:
        encoded, _ = encode_corpus(test, config.seq_len)
    true_ids = test.class_ids()
    counts = ConfusionCounts.empty(config.num_classes)
    for start in range(0, len(encoded), chunk_size):
        mats = encoded[start : start + chunk_size]
        labels, _ = predict_batch(config, params, mats)
        for offset, pred in enumerate(labels):
            counts.add(true_ids[start + offset], int(pred))
    return metrics_from_counts(counts)


METRICS_CSV_HEADER = "class,precision,recall,f1"


def metrics_csv(report):
    """Per-class rows plus a final macro row (macro = unweighted mean)."""
    lines = [METRICS_CSV_HEADER]
    for c, (p, r, f1) in enumerate(report.per_class):
        lines.append(f"{c},{p:.6f},{r:.6f},{f1:.6f}")
    lines.append(
        f"macro,{report.macro_precision:.6f},{report.macro_recall:.6f},{report.macro_f1:.6f}"
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# KNN + normalized bag-of-words baseline


def _token_counts(text):
    return Counter(text.lower().split())


def _normalize(vec):
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return vec
    return {tok: w / norm for tok, w in vec.items()}


def _dot(a, b):
    if len(b) < len(a):
        a, b = b, a
    return sum(w * b[tok] for tok, w in a.items() if tok in b)


def knn_baseline(train_corpus, test_corpus, k, representation="bow"):
    """Cosine KNN over L2-normalized term-frequency or tf-idf vectors.

    Vote ties break by summed neighbor similarity, then lowest class
    id. Documents whose vectors are empty similarity-match nothing and
    fall through the same tie-break.
    """
    if representation not in ("bow", "tfidf"):
        raise ValueError(f"representation must be bow or tfidf, got {representation!r}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    n_train = len(train_corpus)
    if n_train == 0:
        raise ValueError("knn needs a non-empty training corpus")
    if k > n_train:
        warnings.warn(f"k={k} exceeds the {n_train} training records; clamping")
        k = n_train

    train_tf = [_token_counts(text) for _, text in train_corpus.records]
    if representation == "tfidf":
        df = Counter()
        for tf in train_tf:
            df.update(tf.keys())
        idf = {tok: math.log(n_train / d) for tok, d in df.items()}

        def vectorize(tf):
            return _normalize({t: c * idf[t] for t, c in tf.items() if t in idf})

    else:

        def vectorize(tf):
            return _normalize(dict(tf))

    train_vecs = [vectorize(tf) for tf in train_tf]
    train_ids = train_corpus.class_ids()
    n_classes = train_corpus.class_count

    counts = ConfusionCounts.empty(n_classes)
    test_ids = test_corpus.class_ids()
    for row, (_, text) in enumerate(test_corpus.records):
        query = vectorize(_token_counts(text))
        sims = np.array([_dot(query, tv) for tv in train_vecs])
        # Stable sort on descending similarity; equal sims keep file order.
        nearest = np.argsort(-sims, kind="stable")[:k]
        votes = Counter()
        strength = Counter()
        for i in nearest:
            label = train_ids[int(i)]
            votes[label] += 1
            strength[label] += float(sims[int(i)])
        top = max(votes.values())
        tied = [label for label, v in votes.items() if v == top]
        if len(tied) > 1:
            best_strength = max(strength[label] for label in tied)
            tied = [label for label in tied if strength[label] == best_strength]
        counts.add(test_ids[row], min(tied))
    return metrics_from_counts(counts)


# ---------------------------------------------------------------------------
# cell runtime benchmark


@dataclass
class BenchResult:
    cell: str
    mean_ms: float
    median_ms: float
    std_ms: float
    steps: int
    fingerprint: str


BENCH_CSV_HEADER = "cell,mean_ms,median_ms,std_ms,steps"


def bench_csv(results):
    lines = [BENCH_CSV_HEADER]
    for r in results:
        lines.append(f"{r.cell},{r.mean_ms:.3f},{r.median_ms:.3f},{r.std_ms:.3f},{r.steps}")
    return "\n".join(lines)


def bench_cells(config, corpus, cells, steps=30, warmup=5, batch_size=None,
                lr=0.01, clip=5.0, seed=0):
    """Time full training steps per cell kind on identical batch streams.

    All BLAS threading is pinned to one thread for the timed region, the
    warmup steps are discarded, and every cell sees the same shuffled
    batch index stream (asserted equal via the fingerprint).
    """
    cells = list(cells)
    if not cells:
        raise ValueError("bench needs at least one cell kind")
    if steps < 30:
        raise ValueError(f"bench needs at least 30 timed steps, got {steps}")
    if warmup < 0:
        raise ValueError(f"warmup must be >= 0, got {warmup}")
    if batch_size is None:
        batch_size = min(32, len(corpus))

    encoded, targets = encode_corpus(corpus, config.seq_len)
    from .train import _BatchCycler

    cycler = _BatchCycler(len(corpus), batch_size, named_rng(seed, "bench-shuffle"))
    stream = [cycler.next_batch() for _ in range(warmup + steps)]
    digest = hashlib.sha256()
    digest.update(
        f"{config.filters},{config.hidden},{config.window},{config.pool},"
        f"{config.seq_len},{config.num_classes},{config.alpha},{batch_size},{seed},".encode()
    )
    for idx in stream:
        digest.update(np.array(idx, dtype=np.int64).tobytes())
    fingerprint = digest.hexdigest()[:16]

    results = []
    for kind in cells:
        cfg = replace(config, cell=kind)
        cfg.validate()
        params = init_params(cfg)
        blocks = params.blocks()
        adam = AdamState(lr=lr)
        timings = []
        with threadpool_limits(limits=1):
            for i, idx in enumerate(stream):
                batch = [(encoded[j], int(targets[j])) for j in idx]
                start = time.perf_counter()
                zero_grads(blocks)
                with Tape() as tape:
                    step_loss = batch_loss(cfg, params, batch)
                backward(tape, step_loss, free_intermediate_grads=True)
                clip_gradients(blocks, clip)
                adam_step(adam, blocks)
                elapsed = (time.perf_counter() - start) * 1000.0
                if i >= warmup:
                    timings.append(elapsed)
        timings = np.array(timings)
        results.append(
            BenchResult(
                cell=kind,
                mean_ms=float(timings.mean()),
                median_ms=float(np.median(timings)),
                std_ms=float(timings.std()),
                steps=len(timings),
                fingerprint=fingerprint,
            )
        )
    return results
