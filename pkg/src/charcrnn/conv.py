"""Temporal convolution over one-hot character matrices, plus pooling.

Because input rows are one-hot, a valid convolution never needs the
dense n x 70 matrix: each window contributes one kernel column per
in-alphabet character. The whole batch is therefore a single sparse
selector-matrix product, and blank rows (padding, out-of-alphabet)
vanish from the sparse structure instead of being multiplied by zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .alphabet import ALPHABET_SIZE, CharMatrix
from .tensor import DiffTensor, ShapeError, _route_log, record_op, reduce_max


@dataclass
class ConvParams:
    """Kernel stack [window, 70, filters] and one bias per filter."""

    kernels: DiffTensor
    bias: DiffTensor

    def __post_init__(self):
        if self.kernels.rank != 3 or self.kernels.shape[1] != ALPHABET_SIZE:
            raise ShapeError(f"kernels must be [window, {ALPHABET_SIZE}, filters], got {self.kernels.shape}")
        if self.bias.shape != (self.kernels.shape[2],):
            raise ShapeError(f"bias shape {self.bias.shape} does not match {self.kernels.shape[2]} filters")

    @property
    def window(self):
        return self.kernels.shape[0]

    @property
    def filters(self):
        return self.kernels.shape[2]

    def blocks(self):
        return {"conv.kernels": self.kernels, "conv.bias": self.bias}


def init_conv(window, filters, rng):
    """Uniform kernels in [-r, r] with r = sqrt(6/(window*70 + filters)), zero bias."""
    if window <= 0 or filters <= 0:
        raise ValueError(f"window and filters must be positive, got {window}, {filters}")
    r = np.sqrt(6.0 / (window * ALPHABET_SIZE + filters))
    kernels = DiffTensor(rng.uniform(-r, r, size=(window, ALPHABET_SIZE, filters)))
    bias = DiffTensor(np.zeros(filters))
    return ConvParams(kernels=kernels, bias=bias)


def _ids_batch(inputs):
    if isinstance(inputs, CharMatrix):
        return inputs.ids[None, :], True
    mats = list(inputs)
    if not mats:
        raise ValueError("conv1d_valid needs at least one input")
    n = mats[0].n
    for cm in mats:
        if cm.n != n:
            raise ShapeError(f"batch mixes sequence lengths {n} and {cm.n}")
    return np.stack([cm.ids for cm in mats]), False


def _window_selector(ids, window):
    """CSR matrix [B*T, window*70] picking kernel rows per output frame."""
    batch, n = ids.shape
    frames = n - window + 1
    win = np.lib.stride_tricks.sliding_window_view(ids, window, axis=1)
    valid = win < ALPHABET_SIZE
    cols = win.astype(np.int32) + np.arange(window, dtype=np.int32) * ALPHABET_SIZE
    counts = valid.reshape(batch * frames, window).sum(axis=1)
    indptr = np.zeros(batch * frames + 1, dtype=np.int32)
    np.cumsum(counts, out=indptr[1:])
    indices = cols[valid].astype(np.int32)
    data = np.ones(indices.shape[0])
    return sparse.csr_matrix(
        (data, indices, indptr), shape=(batch * frames, window * ALPHABET_SIZE)
    )


def conv1d_valid(inputs, params):
    """Valid stride-1 convolution + ReLU over one snippet or a batch.

    A single CharMatrix gives a [n-window+1, filters] map; a list gives
    [batch, n-window+1, filters]. Gradients flow to the kernels and
    bias only; the input is a constant.
    """
    ids, single = _ids_batch(inputs)
    window = params.window
    filters = params.filters
    batch, n = ids.shape
    if n < window:
        raise ShapeError(f"sequence length {n} is shorter than one window of {window}")
    frames = n - window + 1

    selector = _window_selector(ids, window)
    kernels, bias = params.kernels, params.bias
    flat_kernels = kernels.data.reshape(window * ALPHABET_SIZE, filters)
    lin = selector @ flat_kernels
    lin += bias.data
    np.maximum(lin, 0.0, out=lin)
    routes = _route_log()
    if routes is not None:
        routes.append(lin > 0.0)
    out_data = lin if single else lin.reshape(batch, frames, filters)
    out = DiffTensor(out_data, check_finite=False)

    def back(g):
        flat_g = g.reshape(batch * frames, filters) * (lin > 0.0)
        kernels.grad.reshape(window * ALPHABET_SIZE, filters)[...] += selector.T @ flat_g
        bias.grad += flat_g.sum(axis=0)

    return record_op("conv1d_valid", (kernels, bias), out, back)


def maxpool_temporal(fm, pool):
    """Non-overlapping temporal max-pooling; a trailing partial window is dropped.

    Ties route the gradient to the earliest frame in the window.
    """
    if pool <= 0:
        raise ValueError(f"pool width must be positive, got {pool}")
    if fm.rank == 2:
        frames, filters = fm.shape
        lead = ()
    elif fm.rank == 3:
        batch, frames, filters = fm.shape
        lead = (batch,)
    else:
        raise ShapeError(f"maxpool_temporal needs rank 2 or 3, got shape {fm.shape}")
    pooled_frames = frames // pool
    if pooled_frames == 0:
        raise ShapeError(f"cannot pool {frames} frames with width {pool}")
    cut = pooled_frames * pool

    windows = fm.data[..., :cut, :].reshape(*lead, pooled_frames, pool, filters)
    idx = np.argmax(windows, axis=-2)
    routes = _route_log()
    if routes is not None:
        routes.append(idx)
    keep = np.expand_dims(idx, -2)
    out_data = np.take_along_axis(windows, keep, axis=-2).squeeze(-2)
    out = DiffTensor(out_data, check_finite=False)

    def back(g):
        routed = np.zeros_like(windows)
        np.put_along_axis(routed, keep, np.expand_dims(g, -2), axis=-2)
        fm.grad[..., :cut, :] += routed.reshape(*lead, cut, filters)

    return record_op("maxpool_temporal", (fm,), out, back)


def max_over_time(fm):
    """Collapse the frame axis to a single per-filter maximum."""
    if fm.rank == 2:
        return reduce_max(fm, axis=0)
    if fm.rank == 3:
        return reduce_max(fm, axis=1)
    raise ShapeError(f"max_over_time needs rank 2 or 3, got shape {fm.shape}")
