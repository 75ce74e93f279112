"""Reverse-mode autodiff on dense float64 arrays of rank 1 to 3.

Ops executed under an active Tape record backward closures; backward()
replays them in reverse, accumulating gradients with +=. Ops executed
with no active tape just compute values, which keeps finite-difference
probing cheap.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not satisfy an op's contract."""


def _shape_fail(op, *shapes):
    described = " and ".join(str(tuple(s)) for s in shapes)
    raise ShapeError(f"{op}: incompatible shapes {described}")


class DiffTensor:
    """A float64 array with a lazily allocated gradient buffer.

    Tensors are write-once: ops produce new tensors instead of mutating
    inputs. `node_id` is assigned when the tensor first participates in
    a recorded op; tensors never touched by a tape keep node_id None.
    """

    __slots__ = ("data", "_grad", "node_id", "_tape_ref")

    def __init__(self, values, check_finite=True):
        data = np.asarray(values, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1)
        if not 1 <= data.ndim <= 3:
            raise ShapeError(f"rank must be 1..3, got shape {data.shape}")
        if data.size == 0:
            raise ShapeError(f"every dimension must be positive, got shape {data.shape}")
        if check_finite and not np.isfinite(data).all():
            raise ValueError("tensor values must be finite")
        self.data = data
        self._grad = None
        self.node_id = None
        self._tape_ref = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def rank(self):
        return self.data.ndim

    @property
    def grad(self):
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        # Supports the `t.grad += g` accumulation idiom: ndarray __iadd__
        # mutates the buffer in place and hands the same object back here.
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.data.shape:
            raise ShapeError(
                f"grad shape {value.shape} does not match tensor shape {self.data.shape}"
            )
        self._grad = value

    def zero_grad(self):
        self._grad = None

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"DiffTensor(shape={self.shape}, node_id={self.node_id})"


def _fresh(values):
    # Internal constructor for op outputs: skips the finiteness scan.
    return DiffTensor(values, check_finite=False)


_TAPE_STACK = []


class Tape:
    """Records ops for one forward pass. Use as a context manager."""

    def __init__(self):
        self._entries = []
        self._next_id = 0

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        """(op name, input node ids, output node id) per recorded op."""
        return [(name, in_ids, out.node_id) for name, in_ids, out, _ in self._entries]

    def _register(self, t):
        if t._tape_ref is not self:
            t._tape_ref = self
            t.node_id = self._next_id
            self._next_id += 1
        return t.node_id

    def _record(self, name, inputs, out, backward_fn):
        in_ids = tuple(self._register(t) for t in inputs)
        self._register(out)
        self._entries.append((name, in_ids, out, backward_fn))


def active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


# When a list, nonsmooth ops append their routing decisions (relu masks,
# argmax picks) during forward evaluation. grad_check uses this to reject
# finite-difference probes whose +/-h evaluations route differently from
# the base point: central differences only estimate the gradient while
# the piecewise-linear routing stays fixed across the probe window.
_ROUTE_TRACE = None


def _route_log():
    return _ROUTE_TRACE


def record_op(name, inputs, out, backward_fn):
    """Register a custom fused op on the active tape, if any.

    `backward_fn` receives the output gradient and must accumulate into
    the inputs' `.grad` buffers itself.
    """
    tape = active_tape()
    if tape is not None:
        tape._record(name, inputs, out, backward_fn)
    return out


def backward(tape, loss, free_intermediate_grads=False):
    """Propagate d(loss)/d(node) through the tape in reverse order.

    Leaf tensors (op inputs that are not op outputs) accumulate across
    repeated calls; op-output buffers are reset at the start of each
    call so every walk contributes exactly one d(loss)/d(leaf). With
    `free_intermediate_grads` the gradient buffer of each op output is
    released once consumed, which roughly halves peak memory on long
    unrolls; leaf gradients are always kept.
    """
    if not isinstance(tape, Tape):
        raise TypeError("backward needs the Tape the loss was recorded on")
    if loss.shape != (1,):
        raise ShapeError(f"backward needs a scalar loss of shape (1,), got {loss.shape}")
    if loss._tape_ref is not tape:
        raise ValueError("loss was not computed under this tape")
    for _, _, out, _ in tape._entries:
        out._grad = None
    loss.grad[0] = 1.0
    for name, in_ids, out, fn in reversed(tape._entries):
        g = out._grad
        if g is None:
            continue
        fn(g)
        if free_intermediate_grads and out is not loss:
            out._grad = None


def zero_grads(tensors):
    """Zero the gradient buffers of an iterable or dict of tensors."""
    if isinstance(tensors, dict):
        tensors = tensors.values()
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# ops


def matmul(a, b):
    """Matrix/vector product: [m,k]@[k,p], [k]@[k,p], or [m,k]@[k]."""
    ar, br = a.rank, b.rank
    if ar == 2 and br == 2:
        if a.shape[1] != b.shape[0]:
            _shape_fail("matmul", a.shape, b.shape)
    elif ar == 1 and br == 2:
        if a.shape[0] != b.shape[0]:
            _shape_fail("matmul", a.shape, b.shape)
    elif ar == 2 and br == 1:
        if a.shape[1] != b.shape[0]:
            _shape_fail("matmul", a.shape, b.shape)
    else:
        _shape_fail("matmul", a.shape, b.shape)
    out = _fresh(a.data @ b.data)
    tape = active_tape()
    if tape is not None:
        def back(g):
            if ar == 2 and br == 2:
                a.grad += g @ b.data.T
                b.grad += a.data.T @ g
            elif ar == 1:
                a.grad += b.data @ g
                b.grad += np.outer(a.data, g)
            else:
                a.grad += np.outer(g, b.data)
                b.grad += a.data.T @ g
        tape._record("matmul", (a, b), out, back)
    return out


def _same_shape_op(name, a, b, value, back_a, back_b):
    if a.shape != b.shape:
        _shape_fail(name, a.shape, b.shape)
    out = _fresh(value)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += back_a(g)
            b.grad += back_b(g)
        tape._record(name, (a, b), out, back)
    return out


def add(a, b):
    """Elementwise sum; shapes must match exactly."""
    return _same_shape_op("add", a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a, b):
    """Elementwise difference; shapes must match exactly."""
    return _same_shape_op("sub", a, b, a.data - b.data, lambda g: g, lambda g: -g)


def hadamard(a, b):
    """Elementwise product; shapes must match exactly."""
    return _same_shape_op(
        "hadamard", a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data
    )


def scale(a, c):
    """Multiply by a Python scalar constant."""
    c = float(c)
    out = _fresh(a.data * c)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g * c
        tape._record("scale", (a,), out, back)
    return out


def add_bias(a, bias):
    """Add a length-n bias vector to every row of an [m,n] matrix."""
    if a.rank != 2 or bias.rank != 1 or a.shape[1] != bias.shape[0]:
        _shape_fail("add_bias", a.shape, bias.shape)
    out = _fresh(a.data + bias.data)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g
            bias.grad += g.sum(axis=0)
        tape._record("add_bias", (a, bias), out, back)
    return out


def rowscale(a, v):
    """Multiply every row of an [m,n] matrix elementwise by a length-n vector."""
    if a.rank != 2 or v.rank != 1 or a.shape[1] != v.shape[0]:
        _shape_fail("rowscale", a.shape, v.shape)
    out = _fresh(a.data * v.data)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g * v.data
            v.grad += (g * a.data).sum(axis=0)
        tape._record("rowscale", (a, v), out, back)
    return out


def sigmoid(a):
    x = a.data
    # Split by sign so exp never overflows.
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = _fresh(out_data)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g * out.data * (1.0 - out.data)
        tape._record("sigmoid", (a,), out, back)
    return out


def tanh(a):
    out = _fresh(np.tanh(a.data))
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g * (1.0 - out.data * out.data)
        tape._record("tanh", (a,), out, back)
    return out


def relu(a):
    out = _fresh(np.maximum(a.data, 0.0))
    if _ROUTE_TRACE is not None:
        _ROUTE_TRACE.append(a.data > 0.0)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g * (a.data > 0.0)
        tape._record("relu", (a,), out, back)
    return out


def _check_axis(name, a, axis):
    if axis is not None and not 0 <= axis < a.rank:
        raise ShapeError(f"{name}: axis {axis} out of range for shape {a.shape}")


def reduce_sum(a, axis=None):
    """Sum along `axis`, or over all elements (shape (1,)) when axis is None."""
    _check_axis("reduce_sum", a, axis)
    if axis is None:
        out = _fresh(np.array([a.data.sum()]))
    else:
        out = _fresh(a.data.sum(axis=axis))
    tape = active_tape()
    if tape is not None:
        def back(g):
            if axis is None:
                a.grad += g[0]
            else:
                a.grad += np.expand_dims(g, axis)
        tape._record("reduce_sum", (a,), out, back)
    return out


def reduce_mean(a, axis=None):
    """Mean along `axis`, or over all elements (shape (1,)) when axis is None."""
    _check_axis("reduce_mean", a, axis)
    n = a.data.size if axis is None else a.shape[axis]
    if axis is None:
        out = _fresh(np.array([a.data.mean()]))
    else:
        out = _fresh(a.data.mean(axis=axis))
    tape = active_tape()
    if tape is not None:
        def back(g):
            if axis is None:
                a.grad += g[0] / n
            else:
                a.grad += np.expand_dims(g, axis) / n
        tape._record("reduce_mean", (a,), out, back)
    return out


def reduce_max(a, axis=None):
    """Max along `axis`; ties route the gradient to the lowest index."""
    _check_axis("reduce_max", a, axis)
    if axis is None:
        flat_idx = int(np.argmax(a.data))
        out = _fresh(np.array([a.data.reshape(-1)[flat_idx]]))
        if _ROUTE_TRACE is not None:
            _ROUTE_TRACE.append(np.array(flat_idx))
    else:
        idx = np.argmax(a.data, axis=axis)
        keep = np.expand_dims(idx, axis)
        out = _fresh(np.take_along_axis(a.data, keep, axis=axis).squeeze(axis))
        if _ROUTE_TRACE is not None:
            _ROUTE_TRACE.append(idx)
    tape = active_tape()
    if tape is not None:
        def back(g):
            if axis is None:
                a.grad.reshape(-1)[flat_idx] += g[0]
            else:
                routed = np.zeros_like(a.data)
                np.put_along_axis(routed, keep, np.expand_dims(g, axis), axis=axis)
                a.grad += routed
        tape._record("reduce_max", (a,), out, back)
    return out


def reshape(a, shape):
    """View the same elements under a new shape (rank 1..3)."""
    try:
        reshaped = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {tuple(shape)}")
    if not 1 <= reshaped.ndim <= 3:
        raise ShapeError(f"reshape: target rank must be 1..3, got {tuple(shape)}")
    out = _fresh(reshaped)
    tape = active_tape()
    if tape is not None:
        def back(g):
            a.grad += g.reshape(a.shape)
        tape._record("reshape", (a,), out, back)
    return out


def time_slice(a, t):
    """Select step t of a [B,T,F] (giving [B,F]) or [T,F] (giving [F]) tensor."""
    if a.rank == 3:
        steps = a.shape[1]
    elif a.rank == 2:
        steps = a.shape[0]
    else:
        raise ShapeError(f"time_slice: need rank 2 or 3, got shape {a.shape}")
    if not 0 <= t < steps:
        raise ShapeError(f"time_slice: step {t} out of range for shape {a.shape}")
    picked = a.data[:, t, :] if a.rank == 3 else a.data[t]
    out = _fresh(picked.copy())
    tape = active_tape()
    if tape is not None:
        def back(g):
            if a.rank == 3:
                a.grad[:, t, :] += g
            else:
                a.grad[t] += g
        tape._record("time_slice", (a,), out, back)
    return out


def softmax_cross_entropy(logits, targets):
    """Stable softmax + cross-entropy against integer class targets.

    Rank-1 logits with a scalar target give a (1,) loss; rank-2 [B,C]
    logits with a length-B target array give per-sample losses (B,).
    Also returns the softmax probabilities as a detached tensor (no
    gradient flows through them).
    """
    x = logits.data
    if logits.rank == 1:
        n_classes = x.shape[0]
        if n_classes < 2:
            raise ShapeError(f"softmax_cross_entropy: need at least 2 classes, got {n_classes}")
        t = int(targets)
        if not 0 <= t < n_classes:
            raise ValueError(f"target {t} out of range for {n_classes} classes")
        z = x - x.max()
        ez = np.exp(z)
        total = ez.sum()
        probs_data = ez / total
        loss = _fresh(np.array([np.log(total) - z[t]]))
        probs = _fresh(probs_data)
        tape = active_tape()
        if tape is not None:
            def back(g):
                delta = probs_data.copy()
                delta[t] -= 1.0
                logits.grad += g[0] * delta
            tape._record("softmax_cross_entropy", (logits,), loss, back)
        return loss, probs

    if logits.rank == 2:
        batch, n_classes = x.shape
        if n_classes < 2:
            raise ShapeError(f"softmax_cross_entropy: need at least 2 classes, got {n_classes}")
        t = np.asarray(targets)
        if t.shape != (batch,):
            _shape_fail("softmax_cross_entropy targets", x.shape, t.shape)
        t = t.astype(np.int64)
        if t.min() < 0 or t.max() >= n_classes:
            raise ValueError(f"targets out of range for {n_classes} classes")
        z = x - x.max(axis=1, keepdims=True)
        ez = np.exp(z)
        total = ez.sum(axis=1, keepdims=True)
        probs_data = ez / total
        rows = np.arange(batch)
        loss = _fresh(np.log(total[:, 0]) - z[rows, t])
        probs = _fresh(probs_data)
        tape = active_tape()
        if tape is not None:
            def back(g):
                delta = probs_data.copy()
                delta[rows, t] -= 1.0
                logits.grad += g[:, None] * delta
            tape._record("softmax_cross_entropy", (logits,), loss, back)
        return loss, probs

    raise ShapeError(f"softmax_cross_entropy: logits must be rank 1 or 2, got {logits.shape}")


# ---------------------------------------------------------------------------
# gradient checking


class GradCheckReport:
    """Per-block worst relative errors from a finite-difference check."""

    def __init__(self, per_block, tol, checked, skipped=None):
        self.per_block = per_block
        self.tol = tol
        self.checked = checked
        self.skipped = skipped if skipped is not None else {name: 0 for name in per_block}
        self.max_rel_err = max(per_block.values()) if per_block else 0.0

    @property
    def passed(self):
        return self.max_rel_err < self.tol

    def __repr__(self):
        worst = max(self.per_block, key=self.per_block.get) if self.per_block else "-"
        return (
            f"GradCheckReport(max_rel_err={self.max_rel_err:.3e}, tol={self.tol:.1e}, "
            f"worst_block={worst!r}, passed={self.passed})"
        )


def _capture_routes(build_loss):
    # Evaluate the loss while logging every relu mask and argmax pick.
    global _ROUTE_TRACE
    _ROUTE_TRACE = []
    try:
        loss = build_loss()
        routes = _ROUTE_TRACE
    finally:
        _ROUTE_TRACE = None
    return float(loss.data.reshape(-1)[0]), routes


def _same_routes(probe, base):
    return len(probe) == len(base) and all(
        np.array_equal(p, b) for p, b in zip(probe, base)
    )


def grad_check(build_loss, blocks, h=1e-4, tol=1e-4, samples_per_block=None, rng=None,
               resolution=1e-7):
    """Compare tape gradients with central differences.

    `build_loss` must rebuild the scalar loss from the current contents
    of `blocks` (a name -> DiffTensor dict) on every call. Relative
    error is |a - n| / max(|a|, |n|, 1e-8) per element; when
    `samples_per_block` is set, only that many randomly chosen elements
    of each block are probed (rng required for reproducibility).

    Two kinds of probe are discarded (counted in the report's
    `skipped`), because on them the difference quotient does not
    measure backward correctness:

    * probes whose +/-h evaluations flip a relu mask or an argmax
      pick: the quotient is not an estimate of the base-point gradient
      when the probe window straddles a routing boundary;
    * probes where analytic and numeric are both below `resolution`:
      rounding the loss to 1 ulp already perturbs the quotient by
      about ulp(loss)/2h (~1e-12 for unit-scale losses at h=1e-4),
      so near-zero partials compare rounding noise, not gradients.
      Elements where either side is large are always kept, which is
      what catches a zeroed or corrupted backward rule.

    Sampled blocks draw replacement elements so the requested probe
    count is still met.
    """
    if samples_per_block is not None and rng is None:
        raise ValueError("samples_per_block needs an rng for reproducible choices")
    zero_grads(blocks)
    with Tape() as tape:
        loss = build_loss()
        if loss.shape != (1,):
            raise ShapeError(f"grad_check needs a scalar loss, got shape {loss.shape}")
        if not np.isfinite(loss.data[0]):
            raise ValueError("grad_check: loss is not finite")
        backward(tape, loss)
    analytic = {name: t.grad.copy() for name, t in blocks.items()}
    _, base_routes = _capture_routes(build_loss)

    per_block = {}
    checked = {}
    skipped = {}
    for name, t in blocks.items():
        flat = t.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        n_elems = flat.shape[0]
        if samples_per_block is None or samples_per_block >= n_elems:
            order = np.arange(n_elems)
            target = n_elems
        else:
            order = rng.permutation(n_elems)
            target = samples_per_block
        worst = 0.0
        done = 0
        skips = 0
        for i in order:
            if done >= target:
                break
            original = flat[i]
            flat[i] = original + h
            up, up_routes = _capture_routes(build_loss)
            flat[i] = original - h
            down, down_routes = _capture_routes(build_loss)
            flat[i] = original
            if not (_same_routes(up_routes, base_routes)
                    and _same_routes(down_routes, base_routes)):
                skips += 1
                continue
            numeric = (up - down) / (2.0 * h)
            a = a_flat[i]
            if max(abs(a), abs(numeric)) <= resolution:
                skips += 1
                continue
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
            done += 1
        if done == 0:
            raise ValueError(
                f"grad_check: every probe of block {name!r} crossed a routing "
                "boundary or fell below the finite-difference resolution; "
                "probe with different data, seed, or config"
            )
        per_block[name] = worst
        checked[name] = done
        skipped[name] = skips
    return GradCheckReport(per_block, tol, checked, skipped)
