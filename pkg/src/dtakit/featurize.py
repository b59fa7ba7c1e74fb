"""Fixed-width feature vectors for atoms (44) and bonds (10).

The layouts are versioned; the version string travels in every checkpoint
so a drift in either layout is detected at load time.

Atom layout (44 = 25 + 8 + 1 + 1 + 4 + 4 + 1):
    element one-hot over 24 symbols + "other"    25
    heavy-atom degree one-hot 0..6 + "other"      8
    formal charge, signed scalar                  1
    aromatic flag                                 1
    hybridization one-hot sp/sp2/sp3/other        4
    chirality one-hot none/cw/ccw/other           4
    explicit-H count clamped to [0, 1]            1

Bond layout (10 = 4 + 1 + 1 + 4):
    bond order one-hot single/double/triple/aromatic   4
    conjugated flag                                    1
    in-ring flag                                       1
    stereo one-hot none/up/down/other                  4
"""

import numpy as np

from .smiles import Atom, Bond

FEATURE_LAYOUT_VERSION = "atom44-bond10-v1"

ATOM_FEATURE_DIM = 44
BOND_FEATURE_DIM = 10

# 24 declared element slots; the SMILES parser accepts only the first ten,
# the rest keep the layout stable if the parser table ever grows.
ELEMENT_SLOTS = (
    "C", "N", "O", "S", "F", "P", "Cl", "Br", "I", "B",
    "Si", "Se", "Na", "K", "Li", "Mg", "Ca", "Fe", "Zn", "Cu",
    "Mn", "Co", "As", "Al",
)

HYBRIDIZATION_SLOTS = ("sp", "sp2", "sp3", "other")
CHIRALITY_SLOTS = ("none", "cw", "ccw", "other")
BOND_ORDER_SLOTS = ("single", "double", "triple", "aromatic")
BOND_STEREO_SLOTS = ("none", "up", "down", "other")

_MAX_DEGREE = 6


def _one_hot(value, slots):
    vec = np.zeros(len(slots) + 1, dtype=np.float64)
    try:
        vec[slots.index(value)] = 1.0
    except ValueError:
        vec[-1] = 1.0
    return vec


def _one_hot_exact(value, slots):
    vec = np.zeros(len(slots), dtype=np.float64)
    vec[slots.index(value) if value in slots else len(slots) - 1] = 1.0
    return vec


def atom_features(atom: Atom) -> np.ndarray:
    """44-entry feature vector; every atom sets at least three one-hot bits."""
    degree = atom.degree if 0 <= atom.degree <= _MAX_DEGREE else None
    deg_vec = np.zeros(_MAX_DEGREE + 2, dtype=np.float64)
    if degree is None:
        deg_vec[-1] = 1.0
    else:
        deg_vec[degree] = 1.0
    out = np.concatenate([
        _one_hot(atom.element, ELEMENT_SLOTS),
        deg_vec,
        [float(atom.formal_charge)],
        [1.0 if atom.is_aromatic else 0.0],
        _one_hot_exact(atom.hybridization, HYBRIDIZATION_SLOTS),
        _one_hot_exact(atom.chirality, CHIRALITY_SLOTS),
        [min(float(atom.explicit_h_count), 1.0)],
    ])
    assert out.shape == (ATOM_FEATURE_DIM,)
    return out


def bond_features(bond: Bond) -> np.ndarray:
    """10-entry feature vector for one bond record."""
    out = np.concatenate([
        _one_hot_exact(bond.order, BOND_ORDER_SLOTS),
        [1.0 if bond.is_conjugated else 0.0],
        [1.0 if bond.is_in_ring else 0.0],
        _one_hot_exact(bond.stereo, BOND_STEREO_SLOTS),
    ])
    assert out.shape == (BOND_FEATURE_DIM,)
    return out
