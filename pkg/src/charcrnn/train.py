"""Adam optimization, the training loop, checkpoints, and the alpha sweep."""

import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .alphabet import encode
from .model import CRNNConfig, CRNNParams, ConfigError, init_params
from .model import loss as batch_loss
from .rng import named_rng
from .tensor import Tape, backward, zero_grads


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError(f"betas must lie in [0,1), got {self.beta1}, {self.beta2}")
        if self.lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")


def effective_rate(lr, beta1, beta2, t):
    """Bias-corrected step size lr * sqrt(1 - beta2^t) / (1 - beta1^t)."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    return lr * math.sqrt(1.0 - beta2**t) / (1.0 - beta1**t)


def adam_step(state, blocks, grads=None):
    """One Adam update over named parameter blocks, in place.

    `grads` defaults to each tensor's accumulated .grad buffer. The
    bias correction is folded into the effective rate, so the raw
    moment buffers decay without separate hat-corrections.
    """
    if grads is None:
        grads = {name: t.grad for name, t in blocks.items()}
    state.step += 1
    rate = effective_rate(state.lr, state.beta1, state.beta2, state.step)
    for name, param in blocks.items():
        g = grads[name]
        if g.shape != param.shape:
            raise ValueError(f"gradient shape {g.shape} mismatches block {name!r} {param.shape}")
        if not np.isfinite(g).all():
            raise FloatingPointError(
                f"non-finite gradient in block {name!r} at step {state.step}"
            )
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(param.data)
            v = state.second_moment[name] = np.zeros_like(param.data)
        else:
            v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        param.data -= rate * m / (np.sqrt(v) + state.eps)
    return state


def clip_gradients(blocks, max_norm):
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((t.grad * t.grad).sum()) for t in blocks.values()))
    if total > max_norm > 0.0:
        factor = max_norm / total
        for t in blocks.values():
            t.grad *= factor
    return total


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainPlan:
    steps: int = 1000
    batch_size: int = 50
    seed: int = 0
    eval_every: int = 0  # 0 disables held-out evaluation during training
    clip: float = 5.0

    def validate(self):
        if self.steps <= 0:
            raise ValueError(f"steps must be positive, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.eval_every < 0:
            raise ValueError(f"eval_every must be >= 0, got {self.eval_every}")
        if self.clip <= 0.0:
            raise ValueError(f"clip must be positive, got {self.clip}")
        return self


class _BatchCycler:
    """Yields sample indices, reshuffling at each full pass."""

    def __init__(self, size, batch_size, rng):
        self.size = size
        self.batch_size = batch_size
        self.rng = rng
        self.order = rng.permutation(size)
        self.pos = 0

    def next_batch(self):
        picked = []
        while len(picked) < self.batch_size:
            if self.pos == self.size:
                self.order = self.rng.permutation(self.size)
                self.pos = 0
            take = min(self.batch_size - len(picked), self.size - self.pos)
            picked.extend(int(i) for i in self.order[self.pos : self.pos + take])
            self.pos += take
        return picked


def encode_corpus(corpus, seq_len):
    """CharMatrix per record plus the dense class-id array."""
    encoded = [encode(text, seq_len) for _, text in corpus.records]
    targets = np.array(corpus.class_ids(), dtype=np.int64)
    return encoded, targets


def train(config, corpus, plan, test=None, lr=0.01, params=None):
    """Run the batch loop; returns (params, trace rows).

    Each trace row is (step, loss, test_f1) with test_f1 None except on
    evaluation steps. Pass `test` with plan.eval_every > 0 to get
    periodic held-out macro-F1. `params` continues training an existing
    model instead of initializing a fresh one.
    """
    config.validate()
    plan.validate()
    if len(corpus) == 0:
        raise ValueError("train needs a non-empty corpus")
    if corpus.class_count > config.num_classes:
        raise ValueError(
            f"corpus has {corpus.class_count} classes but the model only {config.num_classes}"
        )
    if params is None:
        params = init_params(config)
    blocks = params.blocks()
    adam = AdamState(lr=lr)
    cycler = _BatchCycler(len(corpus), plan.batch_size, named_rng(plan.seed, "shuffle"))
    encoded, targets = encode_corpus(corpus, config.seq_len)

    eval_on = plan.eval_every > 0 and test is not None
    if eval_on:
        from .evalbench import evaluate

        test_encoded, _ = encode_corpus(test, config.seq_len)

    trace = []
    for step_no in range(1, plan.steps + 1):
        idx = cycler.next_batch()
        batch = [(encoded[i], int(targets[i])) for i in idx]
        zero_grads(blocks)
        with Tape() as tape:
            step_loss = batch_loss(config, params, batch)
        value = float(step_loss.data[0])
        if not math.isfinite(value):
            raise FloatingPointError(f"training diverged: non-finite loss at step {step_no}")
        backward(tape, step_loss, free_intermediate_grads=True)
        clip_gradients(blocks, plan.clip)
        adam_step(adam, blocks)
        test_f1 = None
        if eval_on and step_no % plan.eval_every == 0:
            test_f1 = evaluate(config, params, test, encoded=test_encoded).macro_f1
        trace.append((step_no, value, test_f1))
    return params, trace


TRACE_CSV_HEADER = "step,loss,test_f1"


def write_trace(trace, out):
    """Emit trace rows as CSV to a file object."""
    out.write(TRACE_CSV_HEADER + "\n")
    for step_no, value, test_f1 in trace:
        tail = "" if test_f1 is None else f"{test_f1:.6f}"
        out.write(f"{step_no},{value:.10f},{tail}\n")


def trace_csv(trace):
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# alpha sweep


@dataclass
class SweepRow:
    alpha: float
    precision: float
    recall: float
    f1: float


def sweep_alpha(config, train_corpus, test_corpus, alphas, plan, lr=0.01):
    """Train one model per alpha under a shared seed; returns (rows, best).

    Rows keep the caller's alpha order; `best` is the row with the
    highest F1 (first such row on ties).
    """
    from .evalbench import evaluate

    alphas = list(alphas)
    if not alphas:
        raise ValueError("sweep needs at least one alpha")
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"alpha must lie in [0,1], got {a}")
    rows = []
    for a in alphas:
        cfg = config.with_alpha(a)
        params, _ = train(cfg, train_corpus, plan, lr=lr)
        report = evaluate(cfg, params, test_corpus)
        rows.append(
            SweepRow(
                alpha=a,
                precision=report.macro_precision,
                recall=report.macro_recall,
                f1=report.macro_f1,
            )
        )
    best = max(rows, key=lambda r: r.f1)
    return rows, best


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = b"CRNN1"

_CONFIG_TYPES = {
    "num_classes": int,
    "filters": int,
    "hidden": int,
    "window": int,
    "pool": int,
    "seq_len": int,
    "alpha": float,
    "cell": str,
    "seed": int,
}


def save_checkpoint(config, params, path):
    """Versioned binary dump: magic, config block, then raw float64 blocks."""
    with open(path, "wb") as f:
        f.write(_MAGIC + b"\n")
        for name in _CONFIG_TYPES:
            f.write(f"{name}={getattr(config, name)}\n".encode("utf-8"))
        f.write(b"\n")
        for name, t in params.blocks().items():
            dims = "x".join(str(d) for d in t.shape)
            f.write(f"{name} {dims}\n".encode("utf-8"))
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    return path


def _read_line(stream, what):
    line = bytearray()
    while True:
        b = stream.read(1)
        if not b:
            raise CorruptCheckpointError(f"truncated checkpoint while reading {what}")
        if b == b"\n":
            return bytes(line).decode("utf-8", errors="replace")
        line.extend(b)
        if len(line) > 4096:
            raise CorruptCheckpointError(f"unterminated line while reading {what}")


_CELL_BLOCK_NAMES = {
    "lstm": ("wi", "ui", "vi", "bi", "wf", "uf", "vf", "bf",
             "wo", "uo", "vo", "bo", "wm", "um", "bm"),
    "gru": ("wz", "uz", "bz", "wr", "ur", "br", "w", "u", "b"),
    "mgu": ("wf", "uf", "bf", "wh", "uh", "bh"),
}


def _expected_shapes(config):
    # Block shapes are fully determined by the config.
    from .alphabet import ALPHABET_SIZE

    d, h = config.filters, config.hidden
    shapes = {
        "conv.kernels": (config.window, ALPHABET_SIZE, config.filters),
        "conv.bias": (config.filters,),
    }
    for base in _CELL_BLOCK_NAMES[config.cell]:
        if base.startswith("w"):
            shapes[f"cell.{base}"] = (d, h)
        elif base.startswith("u"):
            shapes[f"cell.{base}"] = (h, h)
        else:
            shapes[f"cell.{base}"] = (h,)
    shapes["out.weights"] = (config.hidden, config.num_classes)
    shapes["out.bias"] = (config.num_classes,)
    return shapes


def load_checkpoint(path, expect_config=None):
    """Read a checkpoint; returns (config, params).

    Shapes are validated against `expect_config` when given, otherwise
    against the config embedded in the file. Magic, version, shape, and
    truncation problems raise distinct error types.
    """
    with open(path, "rb") as f:
        head = _read_line(f, "magic")
        if not head.startswith("CRNN"):
            raise CorruptCheckpointError(f"{path}: not a checkpoint (bad magic {head[:16]!r})")
        if head.encode() != _MAGIC:
            raise CheckpointVersionError(f"{path}: unsupported version {head!r}, expected CRNN1")
        raw = {}
        while True:
            line = _read_line(f, "config block")
            if not line:
                break
            key, eq, value = line.partition("=")
            if not eq or key not in _CONFIG_TYPES:
                raise CorruptCheckpointError(f"{path}: malformed config line {line!r}")
            try:
                raw[key] = _CONFIG_TYPES[key](value)
            except ValueError:
                raise CorruptCheckpointError(f"{path}: bad value in config line {line!r}")
        missing = set(_CONFIG_TYPES) - set(raw)
        if missing:
            raise CorruptCheckpointError(f"{path}: config block missing {sorted(missing)}")
        config = CRNNConfig(**raw)
        if expect_config is not None:
            for key in _CONFIG_TYPES:
                stored, wanted = getattr(config, key), getattr(expect_config, key)
                if stored != wanted:
                    raise CheckpointShapeError(
                        f"{path}: checkpoint has {key}={stored}, expected {key}={wanted}"
                    )
        target = expect_config if expect_config is not None else config
        expected = _expected_shapes(target)

        loaded = {}
        for name, shape in expected.items():
            header = _read_line(f, f"block header for {name}")
            got_name, _, dims = header.partition(" ")
            if got_name != name:
                raise CorruptCheckpointError(
                    f"{path}: expected block {name!r}, found {got_name!r}"
                )
            try:
                got_shape = tuple(int(d) for d in dims.split("x"))
            except ValueError:
                raise CorruptCheckpointError(f"{path}: malformed dims in header {header!r}")
            if got_shape != shape:
                raise CheckpointShapeError(
                    f"{path}: block {name!r} has shape {got_shape}, expected {shape}"
                )
            count = int(np.prod(shape))
            payload = f.read(count * 8)
            if len(payload) != count * 8:
                raise CorruptCheckpointError(f"{path}: truncated data in block {name!r}")
            loaded[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        if f.read(1):
            raise CorruptCheckpointError(f"{path}: trailing data after final block")

    params = init_params(target)
    for name, t in params.blocks().items():
        t.data[...] = loaded[name]
        t.zero_grad()
    return target, params
