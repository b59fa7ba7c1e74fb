"""Gated attention fusion of drug/protein embeddings plus the affinity head.

Fusion (over a [B, d] batch):
    W1 = sigmoid(Lin(Lin(e_d + e_t)))          gate 1 from the summed inputs
    e1 = W1 * e_d + (1 - W1) * e_t
    W2 = sigmoid(Lin(Lin(e1)))                 gate 2 from the first fusion
    e2 = W2 * e_d + (1 - W2) * e_t             gates the originals again
    W3 = sigmoid(e2)
    out = W3 * e2 + (1 - W3) * (e_d + e_t)     gated skip back to the sum

The head is four affine layers with batch-norm + ReLU between adjacent
layers.  ``add`` / ``concat`` ablation modes bypass the gates.
"""

from __future__ import annotations

from . import autograd as ag


class DimensionMismatch(ValueError):
    pass


FUSION_MODES = ("attention", "add", "concat")


def _gate(x, params, block):
    inner = ag.linear(x, params[f"fusion.block{block}.lin1.w"],
                      params[f"fusion.block{block}.lin1.b"])
    outer = ag.linear(inner, params[f"fusion.block{block}.lin2.w"],
                      params[f"fusion.block{block}.lin2.b"])
    return ag.sigmoid(outer)


def fuse(e_d, e_t, params, return_stages=False):
    """Attention-based fusion of equal-width embedding batches."""
    if e_d.shape != e_t.shape:
        raise DimensionMismatch(
            f"drug {e_d.shape} vs protein {e_t.shape} embeddings")
    total = ag.add(e_d, e_t)
    w1 = _gate(total, params, 1)
    e1 = ag.add(ag.mul(w1, e_d), ag.mul(ag.scale_shift(w1, -1.0, 1.0), e_t))
    w2 = _gate(e1, params, 2)
    e2 = ag.add(ag.mul(w2, e_d), ag.mul(ag.scale_shift(w2, -1.0, 1.0), e_t))
    w3 = ag.sigmoid(e2)
    out = ag.add(ag.mul(w3, e2), ag.mul(ag.scale_shift(w3, -1.0, 1.0), total))
    if return_stages:
        return out, e1, e2
    return out


def fuse_ablation(e_d, e_t, mode, params=None):
    """Dispatch between the gated fusion and the add/concat baselines."""
    if mode == "attention":
        return fuse(e_d, e_t, params)
    if mode == "add":
        return ag.add(e_d, e_t)
    if mode == "concat":
        return ag.concat([e_d, e_t], axis=1)
    raise ValueError(f"unknown fusion mode {mode!r}")


def predict_affinity(fused, params, config, train_mode=False):
    """Four-layer affinity head over a fused [B, *] batch -> [B] tensor."""
    x = fused
    n_hidden = len(config.head_widths)
    for i in range(1, n_hidden + 1):
        x = ag.linear(x, params[f"head.fc{i}.w"], params[f"head.fc{i}.b"])
        x = ag.batch_norm(x, params[f"head.bn{i}.g"], params[f"head.bn{i}.b"],
                          params[f"head.bn{i}.running_mean"],
                          params[f"head.bn{i}.running_var"], train_mode)
        x = ag.relu(x)
    x = ag.linear(x, params[f"head.fc{n_hidden + 1}.w"],
                  params[f"head.fc{n_hidden + 1}.b"])
    return ag.reshape(x, (x.shape[0],))
