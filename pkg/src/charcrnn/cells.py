"""Gated recurrent cells: peephole LSTM, GRU, and the minimal gated unit.

All weight matrices are stored input-major ([D, H] and [H, H]) so a
step computes `x @ W`; that is the transpose of the usual W·x
orientation but numerically identical. Peepholes are diagonal and kept
as length-H vectors. Every gate carries a bias, initialized to zero.

Step functions accept a single D-vector with an H-vector state, or a
[B, D] batch with [B, H] state. `unroll` additionally accepts the whole
sequence as one [T, D] or [B, T, D] tensor, in which case the
input-side projections of all timesteps are computed as one stacked
matrix product before the fold; the result is identical to the
step-by-step fold up to float rounding.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import (
    DiffTensor,
    ShapeError,
    add,
    add_bias,
    hadamard,
    matmul,
    reshape,
    rowscale,
    sigmoid,
    sub,
    tanh,
    time_slice,
)

CELL_KINDS = ("lstm", "gru", "mgu")


def _check_kind(kind):
    if kind not in CELL_KINDS:
        raise ValueError(f"unknown cell kind {kind!r}, expected one of {CELL_KINDS}")


def _check_dims(blocks, input_size, hidden_size):
    for name, t in blocks.items():
        base = name.split(".")[-1]
        if base.startswith("w"):
            expect = (input_size, hidden_size)
        elif base.startswith("u"):
            expect = (hidden_size, hidden_size)
        else:  # bias or peephole vector
            expect = (hidden_size,)
        if t.shape != expect:
            raise ShapeError(f"{name}: expected shape {expect}, got {t.shape}")


@dataclass
class LSTMParams:
    """Gates i/f/o with diagonal peepholes, plus the memory candidate m."""

    wi: DiffTensor
    ui: DiffTensor
    vi: DiffTensor
    bi: DiffTensor
    wf: DiffTensor
    uf: DiffTensor
    vf: DiffTensor
    bf: DiffTensor
    wo: DiffTensor
    uo: DiffTensor
    vo: DiffTensor
    bo: DiffTensor
    wm: DiffTensor
    um: DiffTensor
    bm: DiffTensor

    kind = "lstm"

    def __post_init__(self):
        _check_dims(self.blocks(), self.input_size, self.hidden_size)

    @property
    def input_size(self):
        return self.wi.shape[0]

    @property
    def hidden_size(self):
        return self.wi.shape[1]

    def blocks(self):
        names = ("wi", "ui", "vi", "bi", "wf", "uf", "vf", "bf",
                 "wo", "uo", "vo", "bo", "wm", "um", "bm")
        return {f"lstm.{n}": getattr(self, n) for n in names}

    def input_projections(self):
        return {"i": self.wi, "f": self.wf, "o": self.wo, "m": self.wm}


@dataclass
class GRUParams:
    """Update gate z, reset gate r, and the candidate output."""

    wz: DiffTensor
    uz: DiffTensor
    bz: DiffTensor
    wr: DiffTensor
    ur: DiffTensor
    br: DiffTensor
    w: DiffTensor
    u: DiffTensor
    b: DiffTensor

    kind = "gru"

    def __post_init__(self):
        _check_dims(self.blocks(), self.input_size, self.hidden_size)

    @property
    def input_size(self):
        return self.wz.shape[0]

    @property
    def hidden_size(self):
        return self.wz.shape[1]

    def blocks(self):
        names = ("wz", "uz", "bz", "wr", "ur", "br", "w", "u", "b")
        return {f"gru.{n}": getattr(self, n) for n in names}

    def input_projections(self):
        return {"z": self.wz, "r": self.wr, "c": self.w}


@dataclass
class MGUParams:
    """Single forget gate f and the candidate output."""

    wf: DiffTensor
    uf: DiffTensor
    bf: DiffTensor
    wh: DiffTensor
    uh: DiffTensor
    bh: DiffTensor

    kind = "mgu"

    def __post_init__(self):
        _check_dims(self.blocks(), self.input_size, self.hidden_size)

    @property
    def input_size(self):
        return self.wf.shape[0]

    @property
    def hidden_size(self):
        return self.wf.shape[1]

    def blocks(self):
        names = ("wf", "uf", "bf", "wh", "uh", "bh")
        return {f"mgu.{n}": getattr(self, n) for n in names}

    def input_projections(self):
        return {"f": self.wf, "c": self.wh}


@dataclass
class CellState:
    """Hidden output h, plus the LSTM's internal memory m (else None)."""

    h: DiffTensor
    m: DiffTensor = None


def init_cell(kind, input_size, hidden_size, rng):
    """Uniform [-1/sqrt(H), 1/sqrt(H)] matrices, zero biases and peepholes."""
    _check_kind(kind)
    if input_size <= 0 or hidden_size <= 0:
        raise ValueError(f"sizes must be positive, got D={input_size}, H={hidden_size}")
    r = 1.0 / np.sqrt(hidden_size)

    def w():
        return DiffTensor(rng.uniform(-r, r, size=(input_size, hidden_size)))

    def u():
        return DiffTensor(rng.uniform(-r, r, size=(hidden_size, hidden_size)))

    def vec():
        return DiffTensor(np.zeros(hidden_size))

    if kind == "lstm":
        return LSTMParams(
            wi=w(), ui=u(), vi=vec(), bi=vec(),
            wf=w(), uf=u(), vf=vec(), bf=vec(),
            wo=w(), uo=u(), vo=vec(), bo=vec(),
            wm=w(), um=u(), bm=vec(),
        )
    if kind == "gru":
        return GRUParams(wz=w(), uz=u(), bz=vec(), wr=w(), ur=u(), br=vec(),
                         w=w(), u=u(), b=vec())
    return MGUParams(wf=w(), uf=u(), bf=vec(), wh=w(), uh=u(), bh=vec())


def zero_state(kind, hidden_size, batch=None):
    _check_kind(kind)
    shape = (hidden_size,) if batch is None else (batch, hidden_size)
    h = DiffTensor(np.zeros(shape))
    m = DiffTensor(np.zeros(shape)) if kind == "lstm" else None
    return CellState(h=h, m=m)


def _badd(t, bias):
    return add_bias(t, bias) if t.rank == 2 else add(t, bias)


def _vgate(vec, t):
    # Diagonal-matrix product V·x, as an elementwise scale by V's diagonal.
    return rowscale(t, vec) if t.rank == 2 else hadamard(vec, t)


def _check_step_input(p, x, state):
    if x.shape[-1] != p.input_size:
        raise ShapeError(f"input size {x.shape[-1]} does not match cell D={p.input_size}")
    if state.h.shape[-1] != p.hidden_size:
        raise ShapeError(f"state size {state.h.shape[-1]} does not match cell H={p.hidden_size}")
    if x.rank != state.h.rank:
        raise ShapeError(f"input shape {x.shape} and state shape {state.h.shape} disagree")


def _lstm_step(p, xp, state):
    h, m = state.h, state.m
    pre_i = _badd(add(add(xp["i"], matmul(h, p.ui)), _vgate(p.vi, m)), p.bi)
    i = sigmoid(pre_i)
    pre_f = _badd(add(add(xp["f"], matmul(h, p.uf)), _vgate(p.vf, m)), p.bf)
    f = sigmoid(pre_f)
    cand = tanh(_badd(add(xp["m"], matmul(h, p.um)), p.bm))
    m_new = add(hadamard(f, m), hadamard(i, cand))
    pre_o = _badd(add(add(xp["o"], matmul(h, p.uo)), _vgate(p.vo, m_new)), p.bo)
    o = sigmoid(pre_o)
    h_new = hadamard(o, tanh(m_new))
    return CellState(h=h_new, m=m_new)


def _gru_step(p, xp, state, ones):
    h = state.h
    z = sigmoid(_badd(add(xp["z"], matmul(h, p.uz)), p.bz))
    r = sigmoid(_badd(add(xp["r"], matmul(h, p.ur)), p.br))
    cand = tanh(_badd(add(xp["c"], matmul(hadamard(r, h), p.u)), p.b))
    h_new = add(hadamard(sub(ones, z), h), hadamard(z, cand))
    return CellState(h=h_new)


def _mgu_step(p, xp, state, ones):
    h = state.h
    f = sigmoid(_badd(add(xp["f"], matmul(h, p.uf)), p.bf))
    cand = tanh(_badd(add(xp["c"], matmul(hadamard(f, h), p.uh)), p.bh))
    h_new = add(hadamard(sub(ones, f), h), hadamard(f, cand))
    return CellState(h=h_new)


def _ones_like_state(h):
    return DiffTensor(np.ones(h.shape))


def _project_input(p, x):
    return {gate: matmul(x, w) for gate, w in p.input_projections().items()}


def lstm_step(p, x, state):
    _check_step_input(p, x, state)
    if state.m is None:
        raise ShapeError("LSTM step needs a state with memory m")
    return _lstm_step(p, _project_input(p, x), state)


def gru_step(p, x, state):
    _check_step_input(p, x, state)
    return _gru_step(p, _project_input(p, x), state, _ones_like_state(state.h))


def mgu_step(p, x, state):
    _check_step_input(p, x, state)
    return _mgu_step(p, _project_input(p, x), state, _ones_like_state(state.h))


_STEPS = {"lstm": lstm_step, "gru": gru_step, "mgu": mgu_step}


def step(kind, params, x, state):
    _check_kind(kind)
    return _STEPS[kind](params, x, state)


def unroll(kind, params, sequence):
    """Fold the step function over a sequence from the all-zero state.

    `sequence` is a list of D-vectors (or [B, D] batches), or one
    [T, D] / [B, T, D] tensor. Returns the final CellState; gradients
    flow back through every timestep.
    """
    _check_kind(kind)
    if isinstance(sequence, DiffTensor):
        return _unroll_stacked(kind, params, sequence)
    steps = list(sequence)
    if not steps:
        raise ValueError("unroll needs a non-empty sequence")
    first = steps[0]
    batch = first.shape[0] if first.rank == 2 else None
    state = zero_state(kind, params.hidden_size, batch)
    if kind == "lstm":
        for x in steps:
            _check_step_input(params, x, state)
            state = _lstm_step(params, _project_input(params, x), state)
        return state
    ones = _ones_like_state(state.h)
    fold = _gru_step if kind == "gru" else _mgu_step
    for x in steps:
        _check_step_input(params, x, state)
        state = fold(params, _project_input(params, x), state, ones)
    return state


def _unroll_stacked(kind, params, sequence):
    # Hoist the x-side projections of every gate out of the time loop:
    # one [B*T, D] @ [D, H] product per gate instead of T small ones.
    if sequence.rank == 3:
        batch, steps, dim = sequence.shape
        flat = reshape(sequence, (batch * steps, dim))
    elif sequence.rank == 2:
        steps, dim = sequence.shape
        batch = None
        flat = sequence
    else:
        raise ShapeError(f"unroll: sequence tensor must be rank 2 or 3, got {sequence.shape}")
    if dim != params.input_size:
        raise ShapeError(f"sequence feature size {dim} does not match cell D={params.input_size}")
    hidden = params.hidden_size
    projected = {}
    for gate, w in params.input_projections().items():
        stacked = matmul(flat, w)
        if batch is not None:
            stacked = reshape(stacked, (batch, steps, hidden))
        projected[gate] = stacked

    state = zero_state(kind, hidden, batch)
    if kind == "lstm":
        for t in range(steps):
            xp = {gate: time_slice(projected[gate], t) for gate in projected}
            state = _lstm_step(params, xp, state)
        return state
    ones = _ones_like_state(state.h)
    fold = _gru_step if kind == "gru" else _mgu_step
    for t in range(steps):
        xp = {gate: time_slice(projected[gate], t) for gate in projected}
        state = fold(params, xp, state, ones)
    return state


def param_count(kind, input_size, hidden_size):
    """Trainable scalar count; MGU/GRU is exactly 2/3 for any D, H."""
    _check_kind(kind)
    if input_size <= 0 or hidden_size <= 0:
        raise ValueError(f"sizes must be positive, got D={input_size}, H={hidden_size}")
    gate = input_size * hidden_size + hidden_size * hidden_size + hidden_size
    if kind == "lstm":
        return 4 * gate + 3 * hidden_size
    if kind == "gru":
        return 3 * gate
    return 2 * gate
