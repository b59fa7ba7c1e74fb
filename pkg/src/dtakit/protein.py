"""Protein sequence encoding: integer codes, embedding, 1-D conv stack.

Residue integer table
---------------------
The 25-letter amino-acid alphabet is A-Z without J.  Three anchor codes
are fixed (A=1, C=2, B=3) and the remaining 22 letters take 4..25 in
alphabetical order; 0 is the pad symbol:

    A=1  C=2  B=3  D=4  E=5  F=6  G=7  H=8  I=9  K=10 L=11 M=12 N=13
    O=14 P=15 Q=16 R=17 S=18 T=19 U=20 V=21 W=22 X=23 Y=24 Z=25

Sequences longer than the maximum length are truncated; shorter ones are
zero-padded.  The pad symbol has a learned embedding row and participates
in convolution (no masking); global max pooling makes the trailing
constant region harmless.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import autograd as ag


class UnknownResidue(ValueError):
    def __init__(self, letter, position):
        super().__init__(f"unknown residue {letter!r} at position {position}")
        self.letter = letter
        self.position = position


class EmptySequence(ValueError):
    pass


MAX_SEQUENCE_LENGTH = 1000
PAD_CODE = 0
VOCABULARY_SIZE = 26  # pad + 25 residues


def _build_residue_codes():
    alphabet = [chr(c) for c in range(ord("A"), ord("Z") + 1) if chr(c) != "J"]
    codes = {"A": 1, "C": 2, "B": 3}
    nxt = 4
    for letter in alphabet:
        if letter not in codes:
            codes[letter] = nxt
            nxt += 1
    return codes


RESIDUE_CODES = _build_residue_codes()

RESIDUE_TABLE_HASH = hashlib.sha256(
    ",".join(f"{k}:{v}" for k, v in sorted(RESIDUE_CODES.items())).encode()
).hexdigest()[:12]


@dataclass
class ProteinSequenceEncoding:
    codes: np.ndarray  # int64 [max_len]
    original_length: int


def encode_sequence(text: str, max_len: int = MAX_SEQUENCE_LENGTH) -> ProteinSequenceEncoding:
    """Integer-encode a raw sequence or a single-record FASTA string.

    Case-insensitive; a leading '>' header line is stripped and line
    breaks inside the sequence are ignored.  Unknown letters raise
    UnknownResidue with the 0-based position in the cleaned sequence.
    """
    if text is None:
        raise EmptySequence("no sequence given")
    lines = text.strip().splitlines()
    if lines and lines[0].startswith(">"):
        lines = lines[1:]
    seq = "".join("".join(lines).split()).upper()
    if not seq:
        raise EmptySequence("no sequence given")
    codes = np.zeros(max_len, dtype=np.int64)
    for pos, letter in enumerate(seq[:max_len]):
        code = RESIDUE_CODES.get(letter)
        if code is None:
            raise UnknownResidue(letter, pos)
        codes[pos] = code
    # Validate the truncated tail too: bad input should never pass silently.
    for pos, letter in enumerate(seq[max_len:], start=max_len):
        if letter not in RESIDUE_CODES:
            raise UnknownResidue(letter, pos)
    return ProteinSequenceEncoding(codes=codes, original_length=len(seq))


def encode_protein(encoding: ProteinSequenceEncoding, params, config,
                   prefix="protein"):
    """Embedding lookup, three conv+ReLU blocks, global max pool -> 1-D tensor.

    ``params`` maps names to autograd Tensors (shared across a batch so
    gradients accumulate on one leaf per parameter).
    """
    def p(name):
        return params[f"{prefix}.{name}"]

    emb = ag.embedding_lookup(p("embedding"), encoding.codes)  # [L, d_p]
    x = ag.transpose2d(emb)  # [d_p, L]
    for i, (kernel, padding) in enumerate(
            zip(config.protein_kernels, config.protein_paddings), start=1):
        x = ag.conv1d(x, p(f"conv{i}.w"), p(f"conv{i}.b"), padding=padding)
        x = ag.relu(x)
    return ag.maxpool_global(x)  # [C_out]
