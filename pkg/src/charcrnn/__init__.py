"""Character-level convolutional-recurrent text classifier."""

from .alphabet import ALPHABET_SIZE, BLANK_ID, CharMatrix, build_alphabet, decode, encode, preprocess
from .cells import CELL_KINDS, CellState, init_cell, param_count, step, unroll, zero_state
from .conv import conv1d_valid, init_conv, max_over_time, maxpool_temporal
from .converters import (
    BROWN_CATEGORIES,
    QC_LABELS,
    brown_records,
    motif_corpus,
    newsgroups_records,
    synthetic_brown_tree,
    synthetic_gnews_records,
    synthetic_qc_lines,
    synthetic_qc_tsv,
    trec_records,
    write_tsv,
)
from .corpus import (
    CorpusError,
    LabeledCorpus,
    SplitPlan,
    filter_corpus,
    load_corpus,
    split,
    stats,
)
from .evalbench import (
    BenchResult,
    ConfusionCounts,
    MetricsReport,
    bench_cells,
    evaluate,
    evaluate_predictions,
    knn_baseline,
    metrics_from_counts,
)
from .model import (
    ConfigError,
    CRNNConfig,
    CRNNParams,
    aggregate,
    forward,
    init_params,
    loss,
    predict,
    predict_batch,
)
from .rng import named_rng
from .tensor import DiffTensor, ShapeError, Tape, backward, grad_check
from .train import (
    AdamState,
    CheckpointError,
    TrainPlan,
    adam_step,
    clip_gradients,
    load_checkpoint,
    save_checkpoint,
    sweep_alpha,
    train,
)

__all__ = [
    "ALPHABET_SIZE",
    "AdamState",
    "BLANK_ID",
    "BROWN_CATEGORIES",
    "BenchResult",
    "CELL_KINDS",
    "CRNNConfig",
    "CRNNParams",
    "CellState",
    "CharMatrix",
    "CheckpointError",
    "ConfigError",
    "ConfusionCounts",
    "CorpusError",
    "DiffTensor",
    "LabeledCorpus",
    "MetricsReport",
    "QC_LABELS",
    "ShapeError",
    "SplitPlan",
    "Tape",
    "TrainPlan",
    "adam_step",
    "aggregate",
    "backward",
    "bench_cells",
    "brown_records",
    "build_alphabet",
    "clip_gradients",
    "conv1d_valid",
    "decode",
    "encode",
    "evaluate",
    "evaluate_predictions",
    "filter_corpus",
    "forward",
    "grad_check",
    "init_cell",
    "init_conv",
    "init_params",
    "knn_baseline",
    "load_checkpoint",
    "load_corpus",
    "loss",
    "max_over_time",
    "maxpool_temporal",
    "metrics_from_counts",
    "motif_corpus",
    "named_rng",
    "newsgroups_records",
    "param_count",
    "predict",
    "predict_batch",
    "preprocess",
    "save_checkpoint",
    "split",
    "stats",
    "step",
    "sweep_alpha",
    "synthetic_brown_tree",
    "synthetic_gnews_records",
    "synthetic_qc_lines",
    "synthetic_qc_tsv",
    "train",
    "trec_records",
    "unroll",
    "write_tsv",
    "zero_state",
]

__version__ = "0.1.0"
