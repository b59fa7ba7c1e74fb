"""Finite-difference verification of the assembled model's gradients.

Builds the model at toy dimensions in float64, computes reverse-mode
gradients for one fixed two-sample batch, and compares every trainable
parameter element against central finite differences (f(x+eps) - f(x-eps))
/ (2 eps).  Relative error uses an absolute floor so vanishing gradients
are compared at absolute scale:

    rel_err = |ad - fd| / max(|ad|, |fd|, floor)

The forward runs in eval mode (deterministic: no dropout, batch-norm from
running statistics), which exercises every trainable parameter.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .data import featurize_records, DatasetRecord
from .model import AffinityModel, ModelConfig


@dataclass
class GradcheckReport:
    max_rel_error: float
    n_params: int
    seconds: float
    worst_param: str

    def passed(self, tolerance=1e-4):
        return self.max_rel_error <= tolerance


TOY_SMILES = ("CC(=O)O", "c1ccncc1")
TOY_PROTEINS = ("MKVLITA", "ACDEFGHIK")


def toy_gradcheck_config(**overrides):
    return ModelConfig.toy(dtype="float64", dropout=0.0, **overrides)


def model_gradcheck(seed=0, eps=1e-5, floor=1e-4, config=None) -> GradcheckReport:
    """Check d(loss)/d(theta) for every trainable element of the toy model."""
    start = time.perf_counter()
    config = config or toy_gradcheck_config()
    rng = np.random.default_rng(seed)
    records = [DatasetRecord(s, p, 5.0 + i) for i, (s, p) in
               enumerate(zip(TOY_SMILES, TOY_PROTEINS))]
    samples = featurize_records(records, config)
    targets = np.asarray([s.target for s in samples], dtype=np.float64)

    model = AffinityModel(config, seed=seed)
    # Nudge biases off zero so no gradient path is accidentally dead.
    for name, arr in model.params.items():
        if name.endswith(".b"):
            arr += rng.uniform(-0.05, 0.05, size=arr.shape)

    tape = ag.Tape()
    pred, leaves = model.forward(samples, tape=tape, return_leaves=True)
    loss = ag.mse_loss(pred, targets)
    tape.backward(loss)

    def loss_value():
        p = model.forward(samples).data
        return float(((p - targets) ** 2).mean())

    max_err = 0.0
    worst = ""
    n_checked = 0
    for name in model.params:
        arr = model.params[name]
        grad = leaves[name].grad
        ad = np.zeros_like(arr) if grad is None else grad
        flat = arr.reshape(-1)
        ad_flat = ad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_value()
            flat[i] = keep - eps
            down = loss_value()
            flat[i] = keep
            fd = (up - down) / (2.0 * eps)
            err = abs(ad_flat[i] - fd) / max(abs(ad_flat[i]), abs(fd), floor)
            n_checked += 1
            if err > max_err:
                max_err = err
                worst = f"{name}[{i}]"
    return GradcheckReport(max_rel_error=max_err, n_params=n_checked,
                           seconds=time.perf_counter() - start,
                           worst_param=worst)


def op_gradcheck(fn, tensors, eps=1e-5, floor=1e-4):
    """FD check for a single op: fn(*tensors) must return a Tensor.

    Returns the max relative error over every element of every input.
    The output is reduced to a scalar by a fixed random projection so
    non-scalar ops are covered.
    """
    rng = np.random.default_rng(99)
    probe = None

    def run(tape=None):
        wrapped = [ag.Tensor(t, tape=tape) for t in tensors]
        out = fn(*wrapped)
        nonlocal probe
        if probe is None:
            probe = rng.standard_normal(out.data.shape)
        flat = ag.reshape(out, (-1,)) if out.data.ndim != 1 else out
        proj = ag.mul(flat, probe.reshape(-1))
        return ag.sum_all(proj), wrapped

    tape = ag.Tape()
    loss, wrapped = run(tape)
    tape.backward(loss)

    max_err = 0.0
    for t_idx, base in enumerate(tensors):
        grad = wrapped[t_idx].grad
        ad = np.zeros_like(base) if grad is None else grad
        flat = base.reshape(-1)
        ad_flat = ad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = float(run()[0].data)
            flat[i] = keep - eps
            down = float(run()[0].data)
            flat[i] = keep
            fd = (up - down) / (2.0 * eps)
            err = abs(ad_flat[i] - fd) / max(abs(ad_flat[i]), abs(fd), floor)
            max_err = max(max_err, err)
    return max_err
