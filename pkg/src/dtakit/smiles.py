"""SMILES parsing for the drug front end.

Supports the organic subset B C N O P S F Cl Br I (aromatic lowercase
b c n o s p), bracket atoms with isotope / chirality (@ and @@) / explicit
hydrogen count / charge, bond symbols ``- = # :``, directional bonds
``/ \\`` (kept as single bonds, direction recorded as bond stereo),
branches, ring closures 1-9 and %nn, and ``.`` for disconnected parts.

Implicit hydrogens are never added as graph nodes; the graphs are
heavy-atom graphs.  Every parse error carries the byte offset of the
offending character in the input string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class SmilesError(ValueError):
    """Base class for parse failures; ``offset`` is a 0-based byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class EmptyInput(SmilesError):
    pass


class UnbalancedParenthesis(SmilesError):
    pass


class UnmatchedRingClosure(SmilesError):
    pass


class UnsupportedElement(SmilesError):
    pass


ORGANIC_ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")

# Smallest usual valence per element; used only by the hybridization rule
# for unbonded bracket atoms.
DEFAULT_VALENCE = {
    "B": 3, "C": 4, "N": 3, "O": 2, "P": 3,
    "S": 2, "F": 1, "Cl": 1, "Br": 1, "I": 1,
}

BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}
MULTIPLE_ORDERS = frozenset({"double", "triple", "aromatic"})

_BRACKET_RE = re.compile(
    r"(?P<isotope>\d+)?"
    r"(?P<element>[A-Z][a-z]?|[a-z])"
    r"(?P<chirality>@@?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\d+|-\d+|\++|-+)?"
    r"$"
)


@dataclass
class Atom:
    element: str
    formal_charge: int = 0
    is_aromatic: bool = False
    chirality: str = "none"  # none | cw | ccw | other
    explicit_h_count: int = 0
    degree: int = 0
    hybridization: str = "sp3"  # sp | sp2 | sp3 | other
    from_bracket: bool = False


@dataclass
class Bond:
    endpoints: tuple[int, int]
    order: str  # single | double | triple | aromatic
    is_conjugated: bool = False
    is_in_ring: bool = False
    stereo: str = "none"  # none | up | down | other


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    source_smiles: str = ""

    @property
    def n_atoms(self):
        return len(self.atoms)

    @property
    def n_bonds(self):
        return len(self.bonds)

    def neighbors(self, idx):
        out = []
        for b in self.bonds:
            i, j = b.endpoints
            if i == idx:
                out.append(j)
            elif j == idx:
                out.append(i)
        return out


def _parse_bracket(body, start, offset_of):
    """Parse the inside of a bracket atom; ``offset_of(k)`` maps positions
    inside ``body`` to input offsets."""
    m = _BRACKET_RE.match(body)
    if m is None or not m.group("element"):
        raise SmilesError(f"malformed bracket atom [{body}]", start)
    sym = m.group("element")
    aromatic = sym.islower()
    element = sym.capitalize() if aromatic else sym
    if aromatic and sym not in AROMATIC_ORGANIC:
        raise UnsupportedElement(f"aromatic element {sym!r} not supported",
                                 offset_of(m.start("element")))
    if element not in ORGANIC_ELEMENTS:
        raise UnsupportedElement(f"element {element!r} not supported",
                                 offset_of(m.start("element")))
    chir = m.group("chirality")
    chirality = "none" if chir is None else ("cw" if chir == "@@" else "ccw")
    hs = m.group("hcount")
    if hs is None:
        hcount = 0
    elif hs == "H":
        hcount = 1
    else:
        hcount = int(hs[1:])
    ch = m.group("charge")
    if ch is None:
        charge = 0
    elif ch[0] == "+" and ch.lstrip("+") == "":
        charge = len(ch)
    elif ch[0] == "-" and ch.lstrip("-") == "":
        charge = -len(ch)
    else:
        charge = int(ch)
    return Atom(element=element, formal_charge=charge, is_aromatic=aromatic,
                chirality=chirality, explicit_h_count=hcount, from_bracket=True)


def parse_smiles(smiles: str) -> Molecule:
    """Parse a SMILES string into a heavy-atom Molecule.

    Atoms are indexed in order of appearance; parsing is deterministic.
    Raises EmptyInput, UnbalancedParenthesis, UnmatchedRingClosure,
    UnsupportedElement, or the SmilesError base for other malformed input.
    """
    if smiles is None or smiles.strip() == "":
        raise EmptyInput("empty SMILES", 0)

    atoms: list[Atom] = []
    bonds: list[Bond] = []
    pair_seen: set[tuple[int, int]] = set()
    prev = None  # index of the bonding anchor
    branch_stack: list[tuple[int, int]] = []  # (anchor, offset of '(')
    pending = None  # (order, stereo, offset) set by an explicit bond symbol
    ring_open: dict[int, tuple[int, tuple | None, int]] = {}

    def add_bond(i, j, order, stereo, offset):
        if i == j:
            raise SmilesError("ring closure bonds an atom to itself", offset)
        key = (min(i, j), max(i, j))
        if key in pair_seen:
            raise SmilesError(f"duplicate bond between atoms {i} and {j}", offset)
        pair_seen.add(key)
        bonds.append(Bond(endpoints=(i, j), order=order, stereo=stereo))

    def attach(idx, offset):
        nonlocal pending, prev
        if prev is None:
            if pending is not None:
                raise SmilesError("bond symbol with no preceding atom",
                                  pending[2])
        else:
            if pending is not None:
                order, stereo, _ = pending
            else:
                both_aromatic = atoms[prev].is_aromatic and atoms[idx].is_aromatic
                order = "aromatic" if both_aromatic else "single"
                stereo = "none"
            add_bond(prev, idx, order, stereo, offset)
        pending = None
        prev = idx

    def close_ring(num, offset):
        nonlocal pending
        if prev is None:
            raise SmilesError("ring closure digit before any atom", offset)
        if num in ring_open:
            other, open_pending, open_offset = ring_open.pop(num)
            if pending is not None and open_pending is not None \
                    and pending[0] != open_pending[0]:
                raise SmilesError(
                    f"conflicting bond orders for ring closure {num}", offset)
            chosen = pending if pending is not None else open_pending
            if chosen is not None:
                order, stereo, _ = chosen
            else:
                both_aromatic = atoms[other].is_aromatic and atoms[prev].is_aromatic
                order = "aromatic" if both_aromatic else "single"
                stereo = "none"
            add_bond(other, prev, order, stereo, offset)
            pending = None
        else:
            ring_open[num] = (prev, pending, offset)
            pending = None

    i = 0
    n = len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "(":
            if prev is None:
                raise SmilesError("branch opened before any atom", i)
            branch_stack.append((prev, i))
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise UnbalancedParenthesis("unmatched ')'", i)
            if pending is not None:
                raise SmilesError("dangling bond symbol before ')'", pending[2])
            prev, _ = branch_stack.pop()
            i += 1
        elif ch in BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError("two bond symbols in a row", i)
            pending = (BOND_SYMBOLS[ch], "none", i)
            i += 1
        elif ch in "/\\":
            if pending is not None:
                raise SmilesError("two bond symbols in a row", i)
            pending = ("single", "up" if ch == "/" else "down", i)
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesError("bond symbol before '.'", pending[2])
            prev = None
            i += 1
        elif ch.isdigit():
            close_ring(int(ch), i)
            i += 1
        elif ch == "%":
            if i + 2 > n - 1:
                raise SmilesError("'%' ring closure needs two digits", i)
            two = smiles[i + 1:i + 3]
            if not two.isdigit():
                raise SmilesError("'%' ring closure needs two digits", i)
            close_ring(int(two), i)
            i += 3
        elif ch == "[":
            end = smiles.find("]", i + 1)
            if end < 0:
                raise SmilesError("unterminated bracket atom", i)
            body = smiles[i + 1:end]
            atom = _parse_bracket(body, i, lambda k: i + 1 + k)
            atoms.append(atom)
            attach(len(atoms) - 1, i)
            i = end + 1
        elif ch.isalpha():
            two = smiles[i:i + 2]
            if two in ("Cl", "Br"):
                atoms.append(Atom(element=two))
                attach(len(atoms) - 1, i)
                i += 2
            elif ch in ORGANIC_ELEMENTS:
                atoms.append(Atom(element=ch))
                attach(len(atoms) - 1, i)
                i += 1
            elif ch in AROMATIC_ORGANIC:
                atoms.append(Atom(element=ch.upper(), is_aromatic=True))
                attach(len(atoms) - 1, i)
                i += 1
            else:
                raise UnsupportedElement(f"element {ch!r} not supported", i)
        else:
            raise SmilesError(f"unexpected character {ch!r}", i)

    if branch_stack:
        raise UnbalancedParenthesis("unclosed '('", branch_stack[-1][1])
    if ring_open:
        num, (_, _, offset) = min(ring_open.items(), key=lambda kv: kv[1][2])
        raise UnmatchedRingClosure(f"ring closure {num} never closed", offset)
    if pending is not None:
        raise SmilesError("dangling bond symbol at end of input", pending[2])
    if not atoms:
        raise EmptyInput("no atoms in SMILES", 0)

    mol = Molecule(atoms=atoms, bonds=bonds, source_smiles=smiles)
    _annotate(mol)
    return mol


def _annotate(mol: Molecule) -> None:
    """Fill degree, ring membership, conjugation, and hybridization."""
    incident: list[list[int]] = [[] for _ in mol.atoms]
    for bi, bond in enumerate(mol.bonds):
        i, j = bond.endpoints
        incident[i].append(bi)
        incident[j].append(bi)
    for atom, inc in zip(mol.atoms, incident):
        atom.degree = len(inc)

    for bi in _ring_bond_indices(mol, incident):
        mol.bonds[bi].is_in_ring = True

    def has_multiple(atom_idx, skip_bi):
        return any(mol.bonds[bi].order in MULTIPLE_ORDERS
                   for bi in incident[atom_idx] if bi != skip_bi)

    for bi, bond in enumerate(mol.bonds):
        if bond.order == "aromatic":
            bond.is_conjugated = True
        elif bond.order == "single":
            i, j = bond.endpoints
            bond.is_conjugated = has_multiple(i, bi) and has_multiple(j, bi)

    for idx, atom in enumerate(mol.atoms):
        orders = [mol.bonds[bi].order for bi in incident[idx]]
        n_double = orders.count("double")
        n_triple = orders.count("triple")
        if atom.degree == 0 and atom.from_bracket:
            expected = DEFAULT_VALENCE[atom.element] + atom.formal_charge
            if atom.explicit_h_count != max(expected, 0):
                atom.hybridization = "other"
                continue
        if n_triple >= 1 or n_double >= 2:
            atom.hybridization = "sp"
        elif n_double == 1 or atom.is_aromatic:
            atom.hybridization = "sp2"
        else:
            atom.hybridization = "sp3"


def _ring_bond_indices(mol: Molecule, incident) -> set[int]:
    """Bond indices lying on a cycle, via iterative Tarjan bridge finding.

    A bond is in a ring exactly when it is not a bridge.
    """
    n = mol.n_atoms
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(incident[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            node, parent_bond, it = stack[-1]
            advanced = False
            for bi in it:
                if bi == parent_bond:
                    continue
                a, b = mol.bonds[bi].endpoints
                nxt = b if a == node else a
                if disc[nxt] == -1:
                    disc[nxt] = low[nxt] = timer
                    timer += 1
                    stack.append((nxt, bi, iter(incident[nxt])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nxt])
            if not advanced:
                stack.pop()
                if stack:
                    pnode = stack[-1][0]
                    low[pnode] = min(low[pnode], low[node])
                    if low[node] > disc[pnode]:
                        bridges.add(parent_bond)
    return set(range(mol.n_bonds)) - bridges
