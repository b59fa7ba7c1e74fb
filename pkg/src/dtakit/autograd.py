"""Dense tensors with reverse-mode automatic differentiation.

A ``Tape`` is created per forward pass; operations append their backward
rules in execution order (which is already topological), and
``Tape.backward`` walks the records in reverse.  Tensors not attached to
a tape act as constants.  All values live in numpy arrays; float32 is the
training precision and float64 is used by the gradient-check suite.

Hot kernels (conv1d, segment softmax/sum, row scatter) are delegated to
``dtakit._kernels`` which picks the compiled extension when available.
"""

from __future__ import annotations

import numpy as np

from . import _kernels


class ShapeMismatch(ValueError):
    def __init__(self, op, *shapes):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


class NotScalarLoss(ValueError):
    pass


class Tensor:
    """A dense array plus an optional tape attachment and gradient slot."""

    __slots__ = ("data", "grad", "tape", "name")

    def __init__(self, data, tape=None, name=None, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.tape = tape
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale_shift(self, -1.0, 0.0)


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self):
        self._records = []

    def leaf(self, data, name=None, dtype=None):
        """Create a recorded input tensor (parameters, mostly)."""
        return Tensor(data, tape=self, name=name, dtype=dtype)

    def record(self, out, inputs, backward_fn):
        self._records.append((out, inputs, backward_fn))

    def __len__(self):
        return len(self._records)

    def backward(self, loss):
        """Populate .grad with d(loss)/d(tensor) for every taped tensor."""
        if loss.tape is not self:
            raise ValueError("loss tensor is not attached to this tape")
        if loss.data.size != 1:
            raise NotScalarLoss(f"loss must be scalar, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, inputs, backward_fn in reversed(self._records):
            if out.grad is None:
                continue
            grads = backward_fn(out.grad)
            for tensor, grad in zip(inputs, grads):
                if grad is None or tensor.tape is None:
                    continue
                if tensor.grad is None:
                    # Grads are never mutated in place, so sharing is safe.
                    tensor.grad = grad
                else:
                    tensor.grad = tensor.grad + grad


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _as_tensor(x, ref=None):
    if isinstance(x, Tensor):
        return x
    dtype = ref.data.dtype if isinstance(ref, Tensor) else None
    return Tensor(np.asarray(x, dtype=dtype))


def _tape_of(*tensors):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data, tape, inputs, backward_fn):
    out = Tensor(data, tape=tape)
    if tape is not None:
        tape.record(out, inputs, backward_fn)
    return out


# ---------------------------------------------------------------- arithmetic

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a)
    tape = _tape_of(a, b)
    data = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(data, tape, (a, b), bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a)
    tape = _tape_of(a, b)
    data = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(data, tape, (a, b), bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a)
    tape = _tape_of(a, b)
    data = a.data * b.data

    def bwd(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _make(data, tape, (a, b), bwd)


def scale_shift(x, scale=1.0, shift=0.0):
    """Elementwise a*x + b with constant a, b."""
    x = _as_tensor(x)
    scale = x.data.dtype.type(scale)
    shift = x.data.dtype.type(shift)
    data = scale * x.data + shift

    def bwd(g):
        return (g * scale,)

    return _make(data, _tape_of(x), (x,), bwd)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch("matmul", a.data.shape, b.data.shape)
    tape = _tape_of(a, b)
    data = a.data @ b.data

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(data, tape, (a, b), bwd)


def linear(x, w, b=None):
    """y = x @ w.T (+ b); weights stored [out, in]."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.shape[-1] != w.data.shape[1]:
        raise ShapeMismatch("linear", x.data.shape, w.data.shape)
    data = x.data @ w.data.T
    inputs = [x, w]
    if b is not None:
        b = _as_tensor(b)
        data = data + b.data
        inputs.append(b)
    tape = _tape_of(*inputs)

    def bwd(g):
        gx = g @ w.data
        gw = g.T @ x.data
        if b is not None:
            return gx, gw, g.sum(axis=0)
        return gx, gw

    return _make(data, tape, tuple(inputs), bwd)


# --------------------------------------------------------------- activations

def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    data = np.where(mask, x.data, x.data.dtype.type(0))

    def bwd(g):
        return (g * mask,)

    return _make(data, _tape_of(x), (x,), bwd)


def sigmoid(x):
    x = _as_tensor(x)
    v = x.data
    data = np.empty_like(v)
    pos = v >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    data[~pos] = ev / (1.0 + ev)

    def bwd(g):
        return (g * data * (1.0 - data),)

    return _make(data, _tape_of(x), (x,), bwd)


def softmax_lastdim(x):
    """Softmax over the last axis, max-stabilized."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    data = ex / ex.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        return (data * (g - dot),)

    return _make(data, _tape_of(x), (x,), bwd)


# --------------------------------------------------------------- reductions

def sum_all(x):
    x = _as_tensor(x)
    data = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def bwd(g):
        return (np.broadcast_to(g, x.data.shape).astype(x.data.dtype),)

    return _make(data, _tape_of(x), (x,), bwd)


def sum_lastdim(x, keepdims=False):
    x = _as_tensor(x)
    data = x.data.sum(axis=-1, keepdims=keepdims)

    def bwd(g):
        gg = g if keepdims else np.expand_dims(g, -1)
        return (np.broadcast_to(gg, x.data.shape).astype(x.data.dtype),)

    return _make(data, _tape_of(x), (x,), bwd)


def mean_rows(x):
    """[n, d] -> [1, d] mean over rows."""
    x = _as_tensor(x)
    n = x.data.shape[0]
    data = x.data.mean(axis=0, keepdims=True)

    def bwd(g):
        return (np.broadcast_to(g / n, x.data.shape).astype(x.data.dtype),)

    return _make(data, _tape_of(x), (x,), bwd)


# ------------------------------------------------------------ normalization

def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.data.dtype.type(eps))
    xn = xc * inv
    data = xn * gain.data + bias.data
    tape = _tape_of(x, gain, bias)

    def bwd(g):
        gxn = g * gain.data
        m1 = gxn.mean(axis=-1, keepdims=True)
        m2 = (gxn * xn).mean(axis=-1, keepdims=True)
        gx = inv * (gxn - m1 - xn * m2)
        axes = tuple(range(g.ndim - 1))
        return gx.astype(x.data.dtype), (g * xn).sum(axis=axes), g.sum(axis=axes)

    return _make(data, tape, (x, gain, bias), bwd)


def batch_norm(x, gain, bias, running_mean, running_var, train_mode,
               momentum=0.1, eps=1e-5):
    """Normalize over the batch axis (0) of a [B, d] input.

    ``running_mean``/``running_var`` are plain numpy arrays owned by the
    caller; in train mode they are updated in place with the biased batch
    statistics.  Eval mode is a deterministic affine map from them, safe
    for batch size 1.
    """
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    tape = _tape_of(x, gain, bias)
    dt = x.data.dtype
    if train_mode:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mu
        running_var *= (1.0 - momentum)
        running_var += momentum * var
        inv = 1.0 / np.sqrt(var + dt.type(eps))
        xn = (x.data - mu) * inv
        data = xn * gain.data + bias.data
        n = x.data.shape[0]

        def bwd(g):
            gxn = g * gain.data
            m1 = gxn.mean(axis=0)
            m2 = (gxn * xn).mean(axis=0)
            gx = inv * (gxn - m1 - xn * m2)
            return gx.astype(dt), (g * xn).sum(axis=0), g.sum(axis=0)

        return _make(data, tape, (x, gain, bias), bwd)

    inv = 1.0 / np.sqrt(running_var + dt.type(eps))
    xn = (x.data - running_mean) * inv
    data = xn * gain.data + bias.data

    def bwd_eval(g):
        gx = (g * gain.data * inv).astype(dt)
        return gx, (g * xn).sum(axis=0), g.sum(axis=0)

    return _make(data, tape, (x, gain, bias), bwd_eval)


# ------------------------------------------------------- structured kernels

def conv1d(x, w, b=None, padding=0):
    """1-D correlation of [C_in, L] with [C_out, C_in, k]; stride/dilation 1."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 2 or w.data.ndim != 3 or x.data.shape[0] != w.data.shape[1]:
        raise ShapeMismatch("conv1d", x.data.shape, w.data.shape)
    if x.data.shape[1] + 2 * padding - w.data.shape[2] + 1 < 1:
        raise ShapeMismatch("conv1d: kernel longer than padded input",
                            x.data.shape, w.data.shape)
    inputs = [x, w]
    bias_arr = None
    if b is not None:
        b = _as_tensor(b)
        bias_arr = np.ascontiguousarray(b.data)
        inputs.append(b)
    tape = _tape_of(*inputs)
    xc = np.ascontiguousarray(x.data)
    wc = np.ascontiguousarray(w.data)
    data = _kernels.conv1d_forward(xc, wc, bias_arr, padding)

    def bwd(g):
        gx, gw, gb = _kernels.conv1d_backward(xc, wc, padding,
                                              np.ascontiguousarray(g))
        if b is not None:
            return gx, gw, gb
        return gx, gw

    return _make(data, tape, tuple(inputs), bwd)


def maxpool_global(x):
    """[C, L] -> [C] per-channel maxima; ties route gradient to the first."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeMismatch("maxpool_global", x.data.shape)
    arg = np.argmax(x.data, axis=1)
    data = x.data[np.arange(x.data.shape[0]), arg]

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[np.arange(x.data.shape[0]), arg] = g
        return (gx,)

    return _make(data, _tape_of(x), (x,), bwd)


def embedding_lookup(table, indices):
    """[V, d] table gathered at integer ``indices`` -> [len(indices), d]."""
    table = _as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    data = table.data[idx]

    def bwd(g):
        gt = np.zeros_like(table.data)
        _kernels.scatter_add_rows(gt, np.ascontiguousarray(idx),
                                  np.ascontiguousarray(g))
        return (gt,)

    return _make(data, _tape_of(table), (table,), bwd)


def gather_rows(x, idx):
    """Row gather x[idx]; backward scatter-adds duplicates."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    data = x.data[idx]

    def bwd(g):
        gx = np.zeros_like(x.data)
        _kernels.scatter_add_rows(gx, np.ascontiguousarray(idx),
                                  np.ascontiguousarray(g))
        return (gx,)

    return _make(data, _tape_of(x), (x,), bwd)


def segment_sum(x, seg_ptr):
    """Sum rows of [m, d] into contiguous segments -> [n_segments, d]."""
    x = _as_tensor(x)
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    data = _kernels.segment_sum(np.ascontiguousarray(x.data), seg_ptr)
    sizes = np.diff(seg_ptr)
    row_seg = np.repeat(np.arange(seg_ptr.shape[0] - 1), sizes)

    def bwd(g):
        return (g[row_seg],)

    return _make(data, _tape_of(x), (x,), bwd)


def segment_softmax(scores, seg_ptr):
    """Softmax of a flat score vector within contiguous segments."""
    scores = _as_tensor(scores)
    seg_ptr = np.asarray(seg_ptr, dtype=np.int64)
    data = _kernels.segment_softmax(np.ascontiguousarray(scores.data), seg_ptr)
    sizes = np.diff(seg_ptr)
    row_seg = np.repeat(np.arange(seg_ptr.shape[0] - 1), sizes)

    def bwd(g):
        wg = data * g
        seg_dot = _kernels.segment_sum(
            np.ascontiguousarray(wg[:, None]), seg_ptr)[:, 0]
        return ((data * (g - seg_dot[row_seg])).astype(scores.data.dtype),)

    return _make(data, _tape_of(scores), (scores,), bwd)


# ------------------------------------------------------------- shape plumbing

def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    tape = _tape_of(*tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tape, tuple(tensors), bwd)


def stack_rows(tensors):
    """Stack 1-D tensors of equal length into a [B, d] matrix."""
    tensors = [_as_tensor(t) for t in tensors]
    tape = _tape_of(*tensors)
    data = np.stack([t.data for t in tensors])

    def bwd(g):
        return tuple(g[i] for i in range(len(tensors)))

    return _make(data, tape, tuple(tensors), bwd)


def reshape(x, shape):
    x = _as_tensor(x)
    data = x.data.reshape(shape)

    def bwd(g):
        return (g.reshape(x.data.shape),)

    return _make(data, _tape_of(x), (x,), bwd)


def transpose2d(x):
    x = _as_tensor(x)
    data = x.data.T.copy()

    def bwd(g):
        return (g.T.copy(),)

    return _make(data, _tape_of(x), (x,), bwd)


def dropout(x, p, rng, train_mode):
    """Inverted dropout; identity in eval mode or when p == 0."""
    x = _as_tensor(x)
    if not train_mode or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype)
    scale = x.data.dtype.type(1.0 / (1.0 - p))
    mask = keep * scale
    data = x.data * mask

    def bwd(g):
        return (g * mask,)

    return _make(data, _tape_of(x), (x,), bwd)


# -------------------------------------------------------------------- losses

def mse_loss(pred, target):
    """(1/N) sum (pred - target)^2 as a scalar tensor."""
    pred, target = _as_tensor(pred), _as_tensor(target, pred)
    if pred.data.shape != target.data.shape:
        raise ShapeMismatch("mse_loss", pred.data.shape, target.data.shape)
    diff = pred.data - target.data
    n = pred.data.size
    data = np.asarray((diff * diff).sum() / n, dtype=pred.data.dtype)

    def bwd(g):
        coeff = g * pred.data.dtype.type(2.0 / n)
        return coeff * diff, -coeff * diff

    return _make(data, _tape_of(pred, target), (pred, target), bwd)
