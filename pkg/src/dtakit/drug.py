"""Graph transformer encoder over molecular graphs.

Per layer and head, the attention score for a directed edge j -> i is the
elementwise product of projected destination and source node states,
scaled by 1/sqrt(d_h), gated elementwise by the projected edge state; the
softmax over each destination's in-edges is driven by the component sum
of that vector.  Node messages aggregate value projections of sources by
those weights; the vector score itself becomes the new edge state.  Heads
are concatenated, projected, added residually, then passed through a
pre-normalized feed-forward block with an outer residual normalization
(applied independently to node and edge streams).

The drug embedding is the final state of the virtual node; with the
virtual node disabled the mean over final node states is used instead.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag


class MissingVirtualNode(ValueError):
    pass


def embed_inputs(graph, pe_matrix, params, config):
    """Project raw node/edge features (plus positional encodings) to width d_k."""
    dt = np.dtype(config.dtype)
    node_feats = graph.node_features.astype(dt)
    edge_feats = graph.edge_features.astype(dt)
    h = ag.linear(node_feats, params["drug.atom_proj.w"], params["drug.atom_proj.b"])
    if config.use_pe:
        pe = ag.linear(pe_matrix.astype(dt),
                       params["drug.pe_proj.w"], params["drug.pe_proj.b"])
        h = ag.add(h, pe)
    e = ag.linear(edge_feats, params["drug.bond_proj.w"], params["drug.bond_proj.b"])
    return h, e


def attention_scores(h, e, graph, params, config, layer, head):
    """Vector scores [m, d_h] and softmax weights [m] for one layer/head."""
    key = f"drug.layer{layer}.head{head}"
    q = ag.linear(h, params[f"{key}.wq"])
    k = ag.linear(h, params[f"{key}.wk"])
    eproj = ag.linear(e, params[f"{key}.we"])
    q_dst = ag.gather_rows(q, graph.edge_dst)
    k_src = ag.gather_rows(k, graph.edge_src)
    scaled = ag.scale_shift(ag.mul(q_dst, k_src), 1.0 / np.sqrt(config.d_h))
    score_vec = ag.mul(scaled, eproj)                       # [m, d_h]
    weights = ag.segment_softmax(ag.sum_lastdim(score_vec), graph.seg_ptr)
    return score_vec, weights


def layer_forward(h, e, graph, params, config, layer, train=False, rng=None,
                  collect_attention=None):
    """One graph transformer layer; returns updated (node, edge) states."""
    head_nodes, head_edges = [], []
    for head in range(config.n_heads):
        score_vec, weights = attention_scores(h, e, graph, params, config,
                                              layer, head)
        if collect_attention is not None:
            collect_attention.append(weights.data)
        v = ag.linear(h, params[f"drug.layer{layer}.head{head}.wv"])
        msgs = ag.mul(ag.gather_rows(v, graph.edge_src),
                      ag.reshape(weights, (graph.n_edges, 1)))
        head_nodes.append(ag.segment_sum(msgs, graph.seg_ptr))
        head_edges.append(score_vec)
    key = f"drug.layer{layer}"
    hh = ag.add(ag.linear(ag.concat(head_nodes, axis=1),
                          params[f"{key}.out_node.w"], params[f"{key}.out_node.b"]), h)
    ee = ag.add(ag.linear(ag.concat(head_edges, axis=1),
                          params[f"{key}.out_edge.w"], params[f"{key}.out_edge.b"]), e)

    def ffn_block(x, stream):
        inner = ag.layer_norm(x, params[f"{key}.{stream}_norm_inner.g"],
                              params[f"{key}.{stream}_norm_inner.b"])
        ff = ag.linear(ag.relu(ag.linear(inner, params[f"{key}.{stream}_ffn1.w"],
                                         params[f"{key}.{stream}_ffn1.b"])),
                       params[f"{key}.{stream}_ffn2.w"], params[f"{key}.{stream}_ffn2.b"])
        return ag.layer_norm(ag.add(x, ff), params[f"{key}.{stream}_norm_outer.g"],
                             params[f"{key}.{stream}_norm_outer.b"])

    h_next = ffn_block(hh, "node")
    e_next = ffn_block(ee, "edge")
    if train and config.dropout > 0.0:
        h_next = ag.dropout(h_next, config.dropout, rng, train)
        e_next = ag.dropout(e_next, config.dropout, rng, train)
    return h_next, e_next


def encode_drug(graph, params, config, train=False, rng=None,
                collect_attention=None):
    """Run all layers and read out the drug embedding as a 1-D tensor.

    In train mode each positional-encoding column's sign is flipped with
    probability 1/2 (standard antidote to eigenvector sign ambiguity).
    """
    pe = graph.positional_encoding
    if config.use_pe and train:
        if rng is None:
            raise ValueError("train-mode encoding needs an rng")
        signs = rng.integers(0, 2, size=pe.shape[1]) * 2 - 1
        pe = pe * signs[None, :]
    h, e = embed_inputs(graph, pe, params, config)
    for layer in range(config.n_layers):
        h, e = layer_forward(h, e, graph, params, config, layer,
                             train=train, rng=rng,
                             collect_attention=collect_attention)
    if config.use_virtual_node:
        if graph.virtual_node_index is None:
            raise MissingVirtualNode(
                "model is configured for virtual-node readout but the graph "
                "was built without one")
        row = ag.gather_rows(h, np.asarray([graph.virtual_node_index]))
    else:
        row = ag.mean_rows(h)
    return ag.reshape(row, (config.d_o,))
