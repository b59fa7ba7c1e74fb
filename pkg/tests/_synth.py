"""Synthetic inputs shared by the test suite: random parseable SMILES,
random protein sequences, relabeling helpers, and the fixed
random-teacher record set."""

import copy

import numpy as np

from dtakit.data import DatasetRecord, featurize_records
from dtakit.model import AffinityModel, ModelConfig
from dtakit.smiles import Molecule

CHAIN_ATOMS = ["C", "C", "C", "N", "O", "S"]
RING_MOTIFS = ["c1ccccc1", "C1CCCCC1", "c1ccncc1", "C1CCNCC1", "C1=CCCCC1",
               "c1ccc2ccccc2c1"]
RESIDUES = [c for c in "ABCDEFGHIKLMNOPQRSTUVWXYZ"]


def random_smiles(rng, max_units=4):
    """A random parseable SMILES: chain atoms, branches, ring motifs."""
    parts = []
    for _ in range(rng.integers(1, max_units + 1)):
        if rng.random() < 0.3:
            parts.append(str(rng.choice(RING_MOTIFS)))
        else:
            chain = []
            for _ in range(rng.integers(1, 4)):
                if chain and rng.random() < 0.25:
                    chain.append("=")
                chain.append(str(rng.choice(CHAIN_ATOMS)))
            if rng.random() < 0.3:
                chain.append("(" + str(rng.choice(["C", "O", "N", "CC"])) + ")")
                chain.append(str(rng.choice(CHAIN_ATOMS)))
            parts.append("".join(chain))
    return "".join(parts)


def random_protein(rng, lo=8, hi=24):
    length = rng.integers(lo, hi + 1)
    return "".join(str(rng.choice(RESIDUES)) for _ in range(length))


def teacher_records(n=32, seed=7, config=None):
    """Records whose targets come from a fixed random teacher model."""
    config = config or ModelConfig.toy(dropout=0.0)
    rng = np.random.default_rng(seed)
    base = [DatasetRecord(random_smiles(rng), random_protein(rng), 0.0)
            for _ in range(n)]
    teacher = AffinityModel(config, seed=seed + 1)
    samples = featurize_records(base, config)
    targets = teacher.predict(samples)
    return [DatasetRecord(r.smiles, r.protein_seq, float(t))
            for r, t in zip(base, targets)]


def permute_molecule(mol, perm):
    """Relabel atoms: new atom k is old atom perm[k]; bonds remapped."""
    inv = np.argsort(perm)
    atoms = [copy.copy(mol.atoms[p]) for p in perm]
    bonds = []
    for b in mol.bonds:
        i, j = b.endpoints
        nb = copy.copy(b)
        nb.endpoints = (int(inv[i]), int(inv[j]))
        bonds.append(nb)
    return Molecule(atoms=atoms, bonds=bonds, source_smiles=mol.source_smiles)


def pe_well_conditioned(basis, k_pe, gap=1e-6):
    """True when the used spectral encodings are stable under relabeling:
    the used eigenvalues (plus the cut boundary) are pairwise separated,
    and no used eigenvector has a near-tie in entry magnitude at the top
    with mixed signs (such ties arise from graph automorphisms and make
    the canonical sign choice label-dependent)."""
    ev = basis.eigenvalues
    hi = min(len(ev) - 1, k_pe + 1)
    gaps = np.diff(ev[1:hi + 1])
    if gaps.size and gaps.min() <= gap:
        return False
    used = basis.eigenvectors[:, 1:1 + min(max(len(ev) - 1, 0), k_pe)]
    for c in range(used.shape[1]):
        col = used[:, c]
        top = np.abs(col).max()
        near = col[np.abs(col) > top - gap]
        if not (np.all(near > 0) or np.all(near < 0)):
            return False
    return True
