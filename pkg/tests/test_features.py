import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dtakit.featurize import (ATOM_FEATURE_DIM, BOND_FEATURE_DIM,
                              ELEMENT_SLOTS, atom_features, bond_features)
from dtakit.smiles import Atom, Bond, parse_smiles

from _synth import random_smiles


def test_neutral_sp3_carbon_layout():
    atom = Atom(element="C", degree=4, hybridization="sp3")
    vec = atom_features(atom)
    assert vec.shape == (ATOM_FEATURE_DIM,)
    hot = set(np.flatnonzero(vec).tolist())
    carbon_slot = ELEMENT_SLOTS.index("C")
    degree4_slot = 25 + 4
    sp3_slot = 25 + 8 + 1 + 1 + 2
    chirality_none_slot = 25 + 8 + 1 + 1 + 4 + 0
    assert hot == {carbon_slot, degree4_slot, sp3_slot, chirality_none_slot}


def test_every_atom_sets_at_least_three_bits():
    for smiles in ["C", "c1ccccc1", "[O-]", "[C]", "C[N+](C)(C)C"]:
        for atom in parse_smiles(smiles).atoms:
            assert (atom_features(atom) != 0).sum() >= 3


def test_formal_charge_is_single_entry_difference():
    a = Atom(element="N", degree=3)
    b = Atom(element="N", degree=3, formal_charge=1)
    diff = np.flatnonzero(atom_features(a) != atom_features(b))
    assert diff.shape == (1,)
    assert diff[0] == 25 + 8  # the signed charge scalar


def test_aromatic_ring_bond_features():
    bond = Bond(endpoints=(0, 1), order="aromatic", is_conjugated=True,
                is_in_ring=True)
    vec = bond_features(bond)
    assert vec.shape == (BOND_FEATURE_DIM,)
    assert vec[3] == 1.0  # aromatic slot of the order one-hot
    assert vec[4] == 1.0  # conjugated
    assert vec[5] == 1.0  # in ring
    assert vec[6] == 1.0  # stereo none


def test_plain_single_bond_has_two_nonzeros():
    # Order one-hot plus the stereo "none" slot.
    bond = Bond(endpoints=(0, 1), order="single")
    vec = bond_features(bond)
    assert (vec != 0).sum() == 2
    assert vec[0] == 1.0 and vec[6] == 1.0


def test_double_vs_triple_swaps_two_entries():
    d = bond_features(Bond(endpoints=(0, 1), order="double"))
    t = bond_features(Bond(endpoints=(0, 1), order="triple"))
    assert (d != t).sum() == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_feature_dims_on_random_molecules(seed):
    mol = parse_smiles(random_smiles(np.random.default_rng(seed)))
    for atom in mol.atoms:
        vec = atom_features(atom)
        assert vec.shape == (44,)
        # one-hot blocks each carry exactly one 1
        assert vec[:25].sum() == 1.0
        assert vec[25:33].sum() == 1.0
        assert vec[35:39].sum() == 1.0
        assert vec[39:43].sum() == 1.0
    for bond in mol.bonds:
        vec = bond_features(bond)
        assert vec.shape == (10,)
        assert vec[:4].sum() == 1.0
        assert vec[6:10].sum() == 1.0


def test_corpus_of_real_drug_smiles(smiles_fixture_rows):
    assert len(smiles_fixture_rows) >= 10
    for smiles, *_ in smiles_fixture_rows:
        mol = parse_smiles(smiles)
        for atom in mol.atoms:
            assert atom_features(atom).shape == (44,)
        for bond in mol.bonds:
            assert bond_features(bond).shape == (10,)
