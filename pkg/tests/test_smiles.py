import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtakit.smiles import (EmptyInput, Molecule, SmilesError,
                           UnbalancedParenthesis, UnmatchedRingClosure,
                           UnsupportedElement, parse_smiles)

from _synth import random_smiles


# ----------------------------------------------------------- worked examples

def test_single_carbon():
    mol = parse_smiles("C")
    assert mol.n_atoms == 1 and mol.n_bonds == 0
    atom = mol.atoms[0]
    assert atom.element == "C"
    assert atom.hybridization == "sp3"
    assert atom.degree == 0


def test_carbonyl_both_sp2():
    mol = parse_smiles("C=O")
    assert mol.n_atoms == 2 and mol.n_bonds == 1
    assert mol.bonds[0].order == "double"
    assert all(a.hybridization == "sp2" for a in mol.atoms)


def test_benzene():
    mol = parse_smiles("c1ccccc1")
    assert mol.n_atoms == 6 and mol.n_bonds == 6
    assert all(a.is_aromatic for a in mol.atoms)
    assert all(b.order == "aromatic" for b in mol.bonds)
    assert all(b.is_in_ring for b in mol.bonds)


# ------------------------------------------------------------------- errors

@pytest.mark.parametrize("smiles,exc,offset", [
    ("", EmptyInput, 0),
    ("   ", EmptyInput, 0),
    ("C(C", UnbalancedParenthesis, 1),
    ("CC)", UnbalancedParenthesis, 2),
    ("C1CC", UnmatchedRingClosure, 1),
    ("CXC", UnsupportedElement, 1),
    ("[Xe]", UnsupportedElement, 1),
    ("[Na+]", UnsupportedElement, 1),
])
def test_named_errors_carry_offsets(smiles, exc, offset):
    with pytest.raises(exc) as err:
        parse_smiles(smiles)
    assert err.value.offset == offset


@pytest.mark.parametrize("smiles", [
    "C==C", "C%1C", "[C", "C.=C", "C1C1", "C11", "(C)", "C=",
])
def test_other_malformed_input_raises(smiles):
    with pytest.raises(SmilesError):
        parse_smiles(smiles)


# ------------------------------------------------------------------ details

def test_bracket_atoms():
    mol = parse_smiles("[13C@@H2+]")
    atom = mol.atoms[0]
    assert atom.element == "C"
    assert atom.chirality == "cw"
    assert atom.explicit_h_count == 2
    assert atom.formal_charge == 1


def test_at_is_counterclockwise():
    assert parse_smiles("N[C@H](C)O").atoms[1].chirality == "ccw"


def test_charges():
    assert parse_smiles("[O-]").atoms[0].formal_charge == -1
    assert parse_smiles("[N+]").atoms[0].formal_charge == 1
    assert parse_smiles("[O-2]").atoms[0].formal_charge == -2
    assert parse_smiles("[S++]").atoms[0].formal_charge == 2


def test_directional_bonds_become_single_with_stereo():
    mol = parse_smiles("F/C=C/F")
    orders = [b.order for b in mol.bonds]
    assert orders == ["single", "double", "single"]
    assert mol.bonds[0].stereo == "up"
    assert mol.bonds[2].stereo == "up"


def test_disconnected_components():
    mol = parse_smiles("CCO.CC")
    assert mol.n_atoms == 5 and mol.n_bonds == 3


def test_percent_ring_closure():
    mol = parse_smiles("C%12CCCCC%12")
    assert mol.n_atoms == 6 and mol.n_bonds == 6


def test_two_char_elements():
    mol = parse_smiles("ClCBr")
    assert [a.element for a in mol.atoms] == ["Cl", "C", "Br"]


def test_explicit_single_between_aromatics_stays_single():
    mol = parse_smiles("c1ccccc1-c1ccccc1")
    orders = [b.order for b in mol.bonds]
    assert orders.count("single") == 1
    assert orders.count("aromatic") == 12


def test_hybridization_rules():
    assert parse_smiles("C#N").atoms[0].hybridization == "sp"
    assert parse_smiles("O=C=O").atoms[1].hybridization == "sp"
    assert parse_smiles("CC").atoms[0].hybridization == "sp3"
    # Unbonded bracket atom with unusual valence.
    assert parse_smiles("[C]").atoms[0].hybridization == "other"
    assert parse_smiles("[CH4]").atoms[0].hybridization == "sp3"


def test_conjugation_rule():
    mol = parse_smiles("C=CC=C")  # middle single bond is conjugated
    singles = [b for b in mol.bonds if b.order == "single"]
    assert len(singles) == 1 and singles[0].is_conjugated
    mol2 = parse_smiles("C=CC")  # no multiple bond on the far side
    singles2 = [b for b in mol2.bonds if b.order == "single"]
    assert len(singles2) == 1 and not singles2[0].is_conjugated


# -------------------------------------------------------------- properties

def _ring_bonds_oracle(mol: Molecule):
    """Independent cycle oracle: a bond is in a ring iff removing it keeps
    its endpoints connected (BFS over the remaining bonds)."""
    in_ring = set()
    for skip, bond in enumerate(mol.bonds):
        a, b = bond.endpoints
        adj = {i: [] for i in range(mol.n_atoms)}
        for k, other in enumerate(mol.bonds):
            if k == skip:
                continue
            i, j = other.endpoints
            adj[i].append(j)
            adj[j].append(i)
        seen = {a}
        queue = [a]
        while queue:
            node = queue.pop()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if b in seen:
            in_ring.add(skip)
    return in_ring


def test_ring_membership_matches_oracle(smiles_fixture_rows, rng):
    corpus = [row[0] for row in smiles_fixture_rows]
    corpus += [random_smiles(rng) for _ in range(20)]
    for smiles in corpus:
        mol = parse_smiles(smiles)
        expected = _ring_bonds_oracle(mol)
        got = {i for i, b in enumerate(mol.bonds) if b.is_in_ring}
        assert got == expected, smiles


def test_parse_deterministic(rng):
    for _ in range(20):
        smiles = random_smiles(rng)
        m1, m2 = parse_smiles(smiles), parse_smiles(smiles)
        assert [a.__dict__ for a in m1.atoms] == [a.__dict__ for a in m2.atoms]
        assert [b.__dict__ for b in m1.bonds] == [b.__dict__ for b in m2.bonds]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_degree_sum_is_twice_bond_count(seed):
    import numpy as np
    mol = parse_smiles(random_smiles(np.random.default_rng(seed)))
    assert sum(a.degree for a in mol.atoms) == 2 * mol.n_bonds


def test_fixture_hand_counts(smiles_fixture_rows):
    for smiles, atoms, bonds, aromatic, ring in smiles_fixture_rows:
        mol = parse_smiles(smiles)
        assert mol.n_atoms == atoms, smiles
        assert mol.n_bonds == bonds, smiles
        assert sum(a.is_aromatic for a in mol.atoms) == aromatic, smiles
        assert sum(b.is_in_ring for b in mol.bonds) == ring, smiles
