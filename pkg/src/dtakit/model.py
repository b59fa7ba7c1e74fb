"""Model configuration, parameter initialization, and the assembled network.

``ModelConfig`` pins every architectural hyperparameter; it is stored in
checkpoints together with the feature-layout version and the residue
table hash so stale artifacts are rejected at load time.  Defaults are
the full-size architecture: drug encoder input/output width 128 with
per-head width 16, 10 layers, 8 heads, dropout 0.2; protein encoder
embedding 128 with channels 256/256/128, kernels (2, 3, 5) and paddings
(5, 7, 11); head widths 1024/512/128.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autograd as ag
from . import drug, fusion, protein
from .featurize import (ATOM_FEATURE_DIM, BOND_FEATURE_DIM,
                        FEATURE_LAYOUT_VERSION)
from .protein import RESIDUE_TABLE_HASH, VOCABULARY_SIZE


@dataclass(frozen=True)
class ModelConfig:
    d_k: int = 128            # drug encoder input width
    d_h: int = 16             # per-head hidden width
    d_o: int = 128            # drug encoder output width (= d_k, residuals)
    n_heads: int = 8
    n_layers: int = 10
    k_pe: int = 8             # spectral positional-encoding width
    use_pe: bool = True
    use_virtual_node: bool = True
    dropout: float = 0.2
    dropout_scope: str = "node+edge"
    l_p: int = 1000           # protein sequence length cap
    d_p: int = 128            # protein embedding width
    protein_channels: tuple = (256, 256, 128)
    protein_kernels: tuple = (2, 3, 5)
    protein_paddings: tuple = (5, 7, 11)
    fusion_mode: str = "attention"
    head_widths: tuple = (1024, 512, 128)
    dtype: str = "float32"
    feature_layout: str = FEATURE_LAYOUT_VERSION
    residue_table: str = RESIDUE_TABLE_HASH

    def __post_init__(self):
        if self.d_k != self.d_o:
            raise ValueError("d_k must equal d_o for residual compatibility")
        if self.fusion_mode not in fusion.FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")

    @property
    def embedding_width(self):
        return self.d_o

    @property
    def fused_width(self):
        return 2 * self.d_o if self.fusion_mode == "concat" else self.d_o

    @classmethod
    def toy(cls, **overrides):
        """Small dims for gradient checks and smoke training."""
        base = dict(d_k=8, d_h=2, d_o=8, n_heads=2, n_layers=2, k_pe=4,
                    l_p=12, d_p=4, protein_channels=(8, 8, 8),
                    head_widths=(16, 8, 4))
        base.update(overrides)
        return cls(**base)

    def replace(self, **overrides):
        return replace(self, **overrides)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _glorot(rng, fan_out, fan_in, dtype, *shape_extra):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_out, fan_in) + shape_extra
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_params(config: ModelConfig, seed: int = 0):
    """Seeded glorot-uniform weights, zero biases, unit batch-norm stats.

    Returns (trainable, state): two name->array dicts; ``state`` holds the
    batch-norm running statistics.
    """
    rng = np.random.default_rng(seed)
    dt = np.dtype(config.dtype)
    params: dict[str, np.ndarray] = {}
    state: dict[str, np.ndarray] = {}

    def lin(name, fan_out, fan_in, bias=True):
        params[f"{name}.w"] = _glorot(rng, fan_out, fan_in, dt)
        if bias:
            params[f"{name}.b"] = np.zeros(fan_out, dtype=dt)

    def norm(name, width):
        params[f"{name}.g"] = np.ones(width, dtype=dt)
        params[f"{name}.b"] = np.zeros(width, dtype=dt)

    lin("drug.atom_proj", config.d_k, ATOM_FEATURE_DIM)
    lin("drug.bond_proj", config.d_k, BOND_FEATURE_DIM)
    if config.use_pe:
        lin("drug.pe_proj", config.d_k, config.k_pe)
    for layer in range(config.n_layers):
        key = f"drug.layer{layer}"
        for head in range(config.n_heads):
            for mat in ("wq", "wk", "wv", "we"):
                params[f"{key}.head{head}.{mat}"] = _glorot(
                    rng, config.d_h, config.d_k, dt)
        lin(f"{key}.out_node", config.d_o, config.n_heads * config.d_h)
        lin(f"{key}.out_edge", config.d_o, config.n_heads * config.d_h)
        for stream in ("node", "edge"):
            lin(f"{key}.{stream}_ffn1", config.d_o, config.d_o)
            lin(f"{key}.{stream}_ffn2", config.d_o, config.d_o)
            norm(f"{key}.{stream}_norm_inner", config.d_o)
            norm(f"{key}.{stream}_norm_outer", config.d_o)

    bound = np.sqrt(6.0 / (VOCABULARY_SIZE + config.d_p))
    params["protein.embedding"] = rng.uniform(
        -bound, bound, size=(VOCABULARY_SIZE, config.d_p)).astype(dt)
    c_prev = config.d_p
    for i, (c_out, k) in enumerate(
            zip(config.protein_channels, config.protein_kernels), start=1):
        params[f"protein.conv{i}.w"] = _glorot(rng, c_out, c_prev, dt, k)
        params[f"protein.conv{i}.b"] = np.zeros(c_out, dtype=dt)
        c_prev = c_out
    if c_prev != config.embedding_width:
        raise ValueError(
            f"protein encoder ends at {c_prev} channels but the fusion "
            f"width is {config.embedding_width}")

    if config.fusion_mode == "attention":
        for block in (1, 2):
            lin(f"fusion.block{block}.lin1", config.d_o, config.d_o)
            lin(f"fusion.block{block}.lin2", config.d_o, config.d_o)

    widths = (config.fused_width,) + tuple(config.head_widths) + (1,)
    for i in range(1, len(widths)):
        lin(f"head.fc{i}", widths[i], widths[i - 1])
        if i < len(widths) - 1:
            norm(f"head.bn{i}", widths[i])
            state[f"head.bn{i}.running_mean"] = np.zeros(widths[i], dtype=dt)
            state[f"head.bn{i}.running_var"] = np.ones(widths[i], dtype=dt)
    return params, state


@dataclass
class Sample:
    """One featurized (drug graph, protein codes, target) triple."""
    graph: object
    codes: object
    target: float = float("nan")
    index: int = -1


class AffinityModel:
    """The assembled network: encoders, fusion, head, loss."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params, self.state = init_params(config, seed)

    @classmethod
    def from_arrays(cls, config, params, state):
        model = cls.__new__(cls)
        model.config = config
        model.params = params
        model.state = state
        return model

    def _leaves(self, tape):
        leaves = {name: ag.Tensor(arr, tape=tape, name=name)
                  for name, arr in self.params.items()}
        leaves.update(self.state)  # running stats stay plain arrays
        return leaves

    def forward(self, samples, tape=None, train=False, rng=None,
                return_leaves=False, collect_attention=None):
        """Predictions for a batch of Samples as a [B] tensor."""
        if train and rng is None:
            raise ValueError("train-mode forward needs an rng")
        leaves = self._leaves(tape)
        cfg = self.config
        drug_vecs, prot_vecs = [], []
        for sample in samples:
            drug_vecs.append(drug.encode_drug(
                sample.graph, leaves, cfg, train=train, rng=rng,
                collect_attention=collect_attention))
            prot_vecs.append(protein.encode_protein(
                sample.codes, leaves, cfg))
        e_d = ag.stack_rows(drug_vecs)
        e_t = ag.stack_rows(prot_vecs)
        fused = fusion.fuse_ablation(e_d, e_t, cfg.fusion_mode, leaves)
        pred = fusion.predict_affinity(fused, leaves, cfg, train_mode=train)
        if return_leaves:
            return pred, leaves
        return pred

    def predict(self, samples, batch_size=256):
        """Eval-mode predictions as a plain array."""
        out = []
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            out.append(self.forward(chunk).data)
        if not out:
            return np.zeros(0, dtype=np.dtype(self.config.dtype))
        return np.concatenate(out)

    def loss_and_grads(self, samples, train=True, rng=None):
        """One taped forward/backward; returns (mse, {name: grad or None})."""
        tape = ag.Tape()
        pred, leaves = self.forward(samples, tape=tape, train=train, rng=rng,
                                    return_leaves=True)
        targets = np.asarray([s.target for s in samples], dtype=pred.data.dtype)
        loss = ag.mse_loss(pred, targets)
        tape.backward(loss)
        grads = {name: leaves[name].grad for name in self.params}
        return float(loss.data), grads
