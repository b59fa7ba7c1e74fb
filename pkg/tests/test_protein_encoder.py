import numpy as np
import pytest

from dtakit import autograd as ag
from dtakit.gradcheck import op_gradcheck
from dtakit.model import ModelConfig, init_params
from dtakit.protein import (RESIDUE_CODES, EmptySequence, UnknownResidue,
                            encode_protein, encode_sequence)

TOY = ModelConfig.toy(dtype="float64", dropout=0.0)


def wrap_params(cfg=TOY, seed=0):
    params, _ = init_params(cfg, seed=seed)
    return {k: ag.Tensor(v) for k, v in params.items() if k.startswith("protein.")}


# ------------------------------------------------------------ residue table

def test_anchor_codes():
    assert RESIDUE_CODES["A"] == 1
    assert RESIDUE_CODES["C"] == 2
    assert RESIDUE_CODES["B"] == 3


def test_full_table_covers_25_letters():
    assert len(RESIDUE_CODES) == 25
    assert "J" not in RESIDUE_CODES
    assert sorted(RESIDUE_CODES.values()) == list(range(1, 26))
    assert RESIDUE_CODES["D"] == 4 and RESIDUE_CODES["Z"] == 25


# ---------------------------------------------------------- encode_sequence

def test_single_residue():
    enc = encode_sequence("A")
    assert enc.original_length == 1
    assert enc.codes[0] == RESIDUE_CODES["A"]
    assert np.all(enc.codes[1:] == 0)
    assert enc.codes.shape == (1000,)


def test_truncation_keeps_first_1000():
    seq = "ACDEF" * 300  # 1500 residues
    enc = encode_sequence(seq)
    assert enc.original_length == 1500
    assert enc.codes.shape == (1000,)
    assert np.all(enc.codes != 0)
    expected_tail = RESIDUE_CODES[seq[999]]
    assert enc.codes[999] == expected_tail


def test_acb_codes():
    enc = encode_sequence("ACB")
    assert enc.codes[:3].tolist() == [1, 2, 3]


def test_case_insensitive_and_fasta_header():
    plain = encode_sequence("MKVLITA")
    fasta = encode_sequence(">sp|P0|TEST example\nmkvl\nita\n")
    assert np.array_equal(plain.codes, fasta.codes)
    assert fasta.original_length == 7


def test_unknown_residue_names_letter_and_position():
    with pytest.raises(UnknownResidue) as err:
        encode_sequence("ACJ")
    assert err.value.letter == "J" and err.value.position == 2
    with pytest.raises(UnknownResidue):
        encode_sequence("A" * 1001 + "J")  # beyond the truncation point


def test_empty_sequence():
    with pytest.raises(EmptySequence):
        encode_sequence("")
    with pytest.raises(EmptySequence):
        encode_sequence(">header only\n")


# ----------------------------------------------------------- encode_protein

def test_conv_stack_shapes_match_length_arithmetic():
    cfg = ModelConfig(dtype="float64")
    params = {k: ag.Tensor(v) for k, v in init_params(cfg, 0)[0].items()
              if k.startswith("protein.")}
    enc = encode_sequence("MKVLITA", max_len=cfg.l_p)
    emb = ag.embedding_lookup(params["protein.embedding"], enc.codes)
    x = ag.transpose2d(emb)
    lengths = [cfg.l_p]
    for i, (k, p) in enumerate(zip(cfg.protein_kernels, cfg.protein_paddings), 1):
        x = ag.relu(ag.conv1d(x, params[f"protein.conv{i}.w"],
                              params[f"protein.conv{i}.b"], padding=p))
        lengths.append(x.data.shape[1])
    assert lengths == [1000, 1009, 1021, 1039]
    pooled = ag.maxpool_global(x)
    assert pooled.data.shape == (128,)


def test_output_is_128_dim_default_config():
    cfg = ModelConfig(dtype="float64")
    params = {k: ag.Tensor(v) for k, v in init_params(cfg, 0)[0].items()}
    for seq in ("A", "MKVLITA" * 30):
        out = encode_protein(encode_sequence(seq, cfg.l_p), params, cfg)
        assert out.data.shape == (128,)
        assert np.all(np.isfinite(out.data))


def test_all_pad_inputs_identical():
    # Two different all-pad encodings cannot exist, but any two sequences
    # that encode identically must produce identical embeddings.
    cfg = TOY
    params = wrap_params(cfg)
    a = encode_protein(encode_sequence("AAA", cfg.l_p), params, cfg)
    b = encode_protein(encode_sequence("aaa", cfg.l_p), params, cfg)
    assert np.array_equal(a.data, b.data)


def test_padding_beyond_cap_never_changes_output():
    cfg = TOY  # l_p = 12
    params = wrap_params(cfg)
    base = "ACDEFGHIKLMN"  # exactly 12 residues
    out1 = encode_protein(encode_sequence(base, cfg.l_p), params, cfg)
    out2 = encode_protein(encode_sequence(base + "WWWW", cfg.l_p), params, cfg)
    assert np.array_equal(out1.data, out2.data)


def test_monotone_pooling_against_bruteforce(rng):
    """A single-position change affects a channel only if it attains or
    displaces that channel's max; verified by recomputation."""
    cfg = TOY
    params = wrap_params(cfg)
    enc = encode_sequence("ACDEFGHIKL", cfg.l_p)

    def conv_stack(codes):
        emb = params["protein.embedding"].data[codes]
        x = ag.Tensor(emb.T)
        for i, (k, p) in enumerate(zip(cfg.protein_kernels,
                                       cfg.protein_paddings), 1):
            x = ag.relu(ag.conv1d(x, params[f"protein.conv{i}.w"],
                                  params[f"protein.conv{i}.b"], padding=p))
        return x.data

    base_map = conv_stack(enc.codes)
    base_max = base_map.max(axis=1)
    for _ in range(5):
        pos = int(rng.integers(0, 10))
        codes = enc.codes.copy()
        codes[pos] = int(rng.integers(1, 26))
        new_map = conv_stack(codes)
        new_max = new_map.max(axis=1)
        changed = new_max != base_max
        for c in np.flatnonzero(changed):
            # Brute-force justification: the changed channel's max moved
            # because the recomputed row genuinely attains a new maximum.
            assert new_map[c].max() == new_max[c]
        unchanged_rows = np.flatnonzero(~changed)
        assert np.allclose(new_max[unchanged_rows], base_max[unchanged_rows])


def test_protein_path_gradcheck_toy_dims():
    cfg = ModelConfig.toy(dtype="float64", dropout=0.0, d_p=4,
                          protein_channels=(4, 4, 4))
    with pytest.raises(ValueError):
        init_params(cfg, 0)  # 4 output channels cannot feed the 8-wide fusion

    # Standalone protein stack at the 4->4->4 plan from the module contract.
    rng = np.random.default_rng(3)
    l_p, d_p = 12, 4
    enc = encode_sequence("MKVLITAWWQ", l_p)
    table = rng.standard_normal((26, d_p))
    convs = [rng.standard_normal((4, 4, k)) * 0.5 for k in (2, 3, 5)]
    biases = [rng.standard_normal(4) * 0.1 for _ in range(3)]

    def fn(tbl, w1, b1, w2, b2, w3, b3):
        emb = ag.embedding_lookup(tbl, enc.codes)
        x = ag.transpose2d(emb)
        for w, b, p in ((w1, b1, 5), (w2, b2, 7), (w3, b3, 11)):
            x = ag.relu(ag.conv1d(x, w, b, padding=p))
        return ag.maxpool_global(x)

    err = op_gradcheck(fn, [table, convs[0], biases[0], convs[1], biases[1],
                            convs[2], biases[2]])
    assert err <= 1e-4
