"""Full classifier assembly.

One shared valid convolution feeds two branches: temporal max-pooling
followed by max-over-time (the convolutional summary v), and a gated
recurrent unroll over the same frames (the sequential summary h). A
convex combination alpha*v + (1-alpha)*h feeds a single dense softmax
layer. Filter count and hidden size must match for the combination.
"""

from dataclasses import dataclass, replace

import numpy as np

from .alphabet import CharMatrix, DEFAULT_LENGTH
from .cells import CELL_KINDS, init_cell, unroll
from .conv import ConvParams, conv1d_valid, init_conv, max_over_time, maxpool_temporal
from .rng import named_rng
from .tensor import (
    DiffTensor,
    ShapeError,
    add,
    add_bias,
    matmul,
    reduce_mean,
    scale,
    softmax_cross_entropy,
)


class ConfigError(ValueError):
    """Raised for inconsistent model configuration values."""


@dataclass
class CRNNConfig:
    num_classes: int
    filters: int = 400
    hidden: int = 400
    window: int = 20
    pool: int = 2
    seq_len: int = DEFAULT_LENGTH
    alpha: float = 0.7
    cell: str = "gru"
    seed: int = 0

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be at least 2, got {self.num_classes}")
        if self.filters != self.hidden:
            raise ConfigError(
                f"filters ({self.filters}) must equal hidden ({self.hidden}): "
                "the aggregation adds the two branch vectors elementwise"
            )
        if self.window <= 0 or self.pool <= 0:
            raise ConfigError(f"window and pool must be positive, got {self.window}, {self.pool}")
        if self.seq_len <= self.window:
            raise ConfigError(f"seq_len ({self.seq_len}) must exceed window ({self.window})")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0,1], got {self.alpha}")
        if self.cell not in CELL_KINDS:
            raise ConfigError(f"cell must be one of {CELL_KINDS}, got {self.cell!r}")
        if self.frames < self.pool:
            raise ConfigError(f"{self.frames} conv frames cannot be pooled by {self.pool}")
        return self

    @property
    def frames(self):
        return self.seq_len - self.window + 1

    @property
    def pooled_frames(self):
        return self.frames // self.pool

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)


@dataclass
class CRNNParams:
    conv: ConvParams
    cell: object  # LSTMParams | GRUParams | MGUParams
    out_weights: DiffTensor  # [H, C], input-major like the cell matrices
    out_bias: DiffTensor  # [C]

    def blocks(self):
        """Flat name -> tensor map; the order is the checkpoint order."""
        named = dict(self.conv.blocks())
        for key, t in self.cell.blocks().items():
            named[f"cell.{key.split('.', 1)[1]}"] = t
        named["out.weights"] = self.out_weights
        named["out.bias"] = self.out_bias
        return named


def init_params(config):
    """Seeded init; each block family draws from its own named stream."""
    config.validate()
    conv = init_conv(config.window, config.filters, named_rng(config.seed, "conv"))
    cell = init_cell(config.cell, config.filters, config.hidden, named_rng(config.seed, "cell"))
    r = 1.0 / np.sqrt(config.hidden)
    out_rng = named_rng(config.seed, "out")
    out_weights = DiffTensor(out_rng.uniform(-r, r, size=(config.hidden, config.num_classes)))
    out_bias = DiffTensor(np.zeros(config.num_classes))
    return CRNNParams(conv=conv, cell=cell, out_weights=out_weights, out_bias=out_bias)


def aggregate(v_cnn, h_rnn, alpha):
    """Convex combination alpha*v + (1-alpha)*h of the branch summaries."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0,1], got {alpha}")
    if v_cnn.shape != h_rnn.shape:
        raise ShapeError(f"aggregate: branch shapes {v_cnn.shape} and {h_rnn.shape} differ")
    return add(scale(v_cnn, alpha), scale(h_rnn, 1.0 - alpha))


def _check_inputs(config, inputs):
    if isinstance(inputs, CharMatrix):
        mats = [inputs]
    else:
        mats = list(inputs)
        if not mats:
            raise ValueError("forward needs at least one input")
    for cm in mats:
        if cm.n != config.seq_len:
            raise ShapeError(
                f"encoder: input has {cm.n} rows but the model expects {config.seq_len}"
            )
    return mats


def forward(config, params, inputs):
    """Logits for one CharMatrix ([C]) or a list of them ([B, C])."""
    single = isinstance(inputs, CharMatrix)
    mats = _check_inputs(config, inputs)

    fm = conv1d_valid(inputs if single else mats, params.conv)
    pooled = maxpool_temporal(fm, config.pool)
    v = max_over_time(pooled)
    state = unroll(config.cell, params.cell, fm)
    a = aggregate(v, state.h, config.alpha)
    logits = matmul(a, params.out_weights)
    if logits.rank == 2:
        return add_bias(logits, params.out_bias)
    return add(logits, params.out_bias)


def _softmax(logits_data):
    z = logits_data - logits_data.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def predict(config, params, one_input):
    """(label, probability vector) for one snippet; ties pick the lowest label."""
    if not isinstance(one_input, CharMatrix):
        raise TypeError("predict takes a single CharMatrix; use predict_batch for lists")
    logits = forward(config, params, one_input)
    probs = _softmax(logits.data)
    return int(np.argmax(probs)), probs


def predict_batch(config, params, inputs):
    """(labels [B], probabilities [B, C]) for a list of snippets."""
    logits = forward(config, params, list(inputs))
    probs = _softmax(logits.data)
    return np.argmax(probs, axis=1), probs


def loss(config, params, batch):
    """Mean softmax cross-entropy over (CharMatrix, label) pairs."""
    batch = list(batch)
    if not batch:
        raise ValueError("loss needs a non-empty batch")
    mats = [cm for cm, _ in batch]
    targets = np.array([label for _, label in batch], dtype=np.int64)
    if targets.min() < 0 or targets.max() >= config.num_classes:
        raise ValueError(
            f"labels must lie in [0, {config.num_classes}), got range "
            f"[{targets.min()}, {targets.max()}]"
        )
    logits = forward(config, params, mats)
    per_sample, _ = softmax_cross_entropy(logits, targets)
    return reduce_mean(per_sample)
