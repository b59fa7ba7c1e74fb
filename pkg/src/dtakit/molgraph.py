"""Model-facing molecular graphs.

Builds the featurized directed graph (optionally with a virtual global
node connected to every atom), the symmetric normalized Laplacian, its
eigendecomposition via cyclic Jacobi sweeps, and the spectral positional
encodings.

When the virtual node is enabled the Laplacian is computed on the graph
including it, so the positional encodings see the augmented topology.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .featurize import (ATOM_FEATURE_DIM, BOND_FEATURE_DIM, atom_features,
                        bond_features)
from .smiles import Molecule


class EmptyMolecule(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


DEFAULT_K_PE = 8


@dataclass
class MolecularGraph:
    n_atoms: int
    node_features: np.ndarray  # [n_nodes, 44]
    edge_src: np.ndarray       # int64 [n_edges], sorted by (dst, src)
    edge_dst: np.ndarray       # int64 [n_edges]
    edge_features: np.ndarray  # [n_edges, 10]
    seg_ptr: np.ndarray        # int64 [n_nodes + 1]; edges grouped by dst
    virtual_node_index: int | None
    positional_encoding: np.ndarray  # [n_nodes, k_pe], eval-mode signs
    source_smiles: str = ""
    spectral: "SpectralBasis | None" = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.node_features.shape[0]

    @property
    def n_edges(self):
        return self.edge_src.shape[0]

    @property
    def edge_list(self):
        return list(zip(self.edge_src.tolist(), self.edge_dst.tolist()))


@dataclass
class SpectralBasis:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # orthonormal columns, canonical signs


def build_graph(molecule: Molecule, use_virtual_node: bool = True,
                k_pe: int = DEFAULT_K_PE) -> MolecularGraph:
    """Featurize a molecule into the directed model graph.

    With the virtual node enabled the node count is n_atoms + 1, the
    virtual feature row and its incident edge rows are all zeros, and the
    edge count is 2*bonds + 2*n_atoms.  Set ``k_pe=0`` to skip the
    spectral work entirely.
    """
    n_atoms = molecule.n_atoms
    if n_atoms == 0:
        raise EmptyMolecule("molecule has no atoms")

    n_nodes = n_atoms + 1 if use_virtual_node else n_atoms
    node_feats = np.zeros((n_nodes, ATOM_FEATURE_DIM), dtype=np.float64)
    for i, atom in enumerate(molecule.atoms):
        node_feats[i] = atom_features(atom)

    src, dst, efeat = [], [], []
    for bond in molecule.bonds:
        i, j = bond.endpoints
        f = bond_features(bond)
        src += [i, j]
        dst += [j, i]
        efeat += [f, f]
    if use_virtual_node:
        vn = n_atoms
        zero = np.zeros(BOND_FEATURE_DIM, dtype=np.float64)
        for i in range(n_atoms):
            src += [vn, i]
            dst += [i, vn]
            efeat += [zero, zero]

    src_arr = np.asarray(src, dtype=np.int64)
    dst_arr = np.asarray(dst, dtype=np.int64)
    if src_arr.size:
        feat_arr = np.stack(efeat)
        order = np.lexsort((src_arr, dst_arr))
        src_arr, dst_arr, feat_arr = src_arr[order], dst_arr[order], feat_arr[order]
    else:
        feat_arr = np.zeros((0, BOND_FEATURE_DIM), dtype=np.float64)
    counts = np.bincount(dst_arr, minlength=n_nodes)
    seg_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    graph = MolecularGraph(
        n_atoms=n_atoms,
        node_features=node_feats,
        edge_src=src_arr,
        edge_dst=dst_arr,
        edge_features=feat_arr,
        seg_ptr=seg_ptr,
        virtual_node_index=n_atoms if use_virtual_node else None,
        positional_encoding=np.zeros((n_nodes, k_pe), dtype=np.float64),
        source_smiles=molecule.source_smiles,
    )
    if k_pe > 0:
        basis = eigendecompose(normalized_laplacian(graph))
        graph.spectral = basis
        graph.positional_encoding = positional_encoding(basis, k_pe)
    return graph


def normalized_laplacian(graph: MolecularGraph) -> np.ndarray:
    """L = I - D^{-1/2} A D^{-1/2} over the unweighted adjacency.

    Isolated nodes get identity rows (their D^{-1/2} entry is taken as 0).
    The result is bit-exactly symmetric.
    """
    n = graph.n_nodes
    adj = np.zeros((n, n), dtype=np.float64)
    adj[graph.edge_src, graph.edge_dst] = 1.0
    deg = adj.sum(axis=1)
    inv_sqrt = np.zeros(n, dtype=np.float64)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.eye(n) - inv_sqrt[:, None] * adj * inv_sqrt[None, :]
    return lap


def eigendecompose(lap: np.ndarray, tol: float = 1e-12,
                   max_sweeps: int = 100) -> SpectralBasis:
    """Diagonalize a symmetric matrix with deterministic Jacobi sweeps.

    Eigenvalues come back ascending; each eigenvector's sign is fixed so
    its largest-magnitude entry is positive (ties go to the lower index).
    """
    lap = np.asarray(lap, dtype=np.float64)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {lap.shape}")
    if lap.size and np.abs(lap - lap.T).max() > 1e-10:
        raise ValueError("matrix is not symmetric")
    values, vectors, _, converged = _kernels.jacobi_sweeps(
        np.ascontiguousarray(lap), tol, max_sweeps)
    if not converged:
        raise ConvergenceFailure(
            f"Jacobi did not converge within {max_sweeps} sweeps")
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    vectors = canonical_signs(vectors)
    return SpectralBasis(eigenvalues=values, eigenvectors=vectors)


def canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    vectors = vectors.copy()
    for c in range(vectors.shape[1]):
        col = vectors[:, c]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0:
            vectors[:, c] = -col
    return vectors


def positional_encoding(basis: SpectralBasis, k_pe: int,
                        train_mode: bool = False, rng=None) -> np.ndarray:
    """Node positional encodings from eigenvectors 2..k_pe+1.

    The trivial smallest-eigenvalue vector is dropped; graphs with fewer
    than k_pe + 1 nodes are zero-padded on the right.  In train mode each
    used column's global sign is flipped with probability 1/2 using the
    supplied generator; in eval mode the canonical sign convention applies.
    """
    if k_pe < 1:
        raise ValueError("k_pe must be >= 1")
    n = basis.eigenvectors.shape[0]
    out = np.zeros((n, k_pe), dtype=np.float64)
    used = min(max(n - 1, 0), k_pe)
    if used:
        cols = canonical_signs(basis.eigenvectors[:, 1:1 + used])
        if train_mode:
            if rng is None:
                raise ValueError("train_mode sign flips need an rng")
            signs = rng.integers(0, 2, size=used) * 2 - 1
            cols = cols * signs[None, :]
        out[:, :used] = cols
    return out
