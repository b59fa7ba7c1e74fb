"""Dataset ingestion, affinity transforms, splits, and featurization.

Dataset CSV format: header ``smiles,protein,affinity,space`` (UTF-8, LF),
with ``space`` one of pKd / kiba / metz_native / raw_Kd_nM.  Malformed
rows are quarantined with their row number and reason, never silently
dropped.  An empty affinity cell marks a prediction-only row (NaN
target); training rejects such rows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .model import Sample
from .molgraph import build_graph
from .protein import encode_sequence
from .smiles import parse_smiles

AFFINITY_SPACES = ("pKd", "kiba", "metz_native", "raw_Kd_nM")


class NonPositiveKd(ValueError):
    pass


class FileUnreadable(OSError):
    pass


class HeaderMismatch(ValueError):
    pass


class TooFewRecords(ValueError):
    pass


class FeaturizationError(ValueError):
    def __init__(self, record_index, smiles, reason):
        super().__init__(
            f"record {record_index} (smiles={smiles!r}): {reason}")
        self.record_index = record_index


@dataclass
class DatasetRecord:
    smiles: str
    protein_seq: str
    affinity: float
    affinity_space: str = "pKd"

    @property
    def target(self):
        """Affinity in model space (pK_d for raw Kd input)."""
        return transform_affinity(self.affinity, self.affinity_space)


@dataclass
class QuarantineEntry:
    row: int  # 1-based data row number (header not counted)
    reason: str


EXPECTED_HEADER = ["smiles", "protein", "affinity", "space"]


def transform_affinity(value: float, space: str) -> float:
    """raw Kd in nM -> pK_d = -log10(Kd / 1e9); other spaces pass through."""
    if space not in AFFINITY_SPACES:
        raise ValueError(f"unknown affinity space {space!r}")
    if space == "raw_Kd_nM":
        if not value > 0:
            raise NonPositiveKd(f"Kd must be positive, got {value}")
        return float(-math.log10(value / 1e9))
    return float(value)


def load_dataset(path):
    """Read a dataset CSV -> (records, quarantine list)."""
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    records: list[DatasetRecord] = []
    quarantine: list[QuarantineEntry] = []
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(f"{path}: empty file") from None
        if [h.strip() for h in header] != EXPECTED_HEADER:
            raise HeaderMismatch(
                f"{path}: expected header {','.join(EXPECTED_HEADER)}, "
                f"got {','.join(header)}")
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                records.append(_validate_row(row))
            except Exception as exc:
                quarantine.append(QuarantineEntry(
                    row=row_no, reason=f"{type(exc).__name__}: {exc}"))
    return records, quarantine


def _validate_row(row) -> DatasetRecord:
    if len(row) != 4:
        raise ValueError(f"expected 4 columns, got {len(row)}")
    smiles, prot, affinity_text, space = (cell.strip() for cell in row)
    parse_smiles(smiles)
    encode_sequence(prot)
    if space not in AFFINITY_SPACES:
        raise ValueError(f"unknown affinity space {space!r}")
    if affinity_text == "":
        affinity = float("nan")
    else:
        affinity = float(affinity_text)
        if not math.isfinite(affinity):
            raise ValueError(f"affinity {affinity_text!r} is not finite")
        transform_affinity(affinity, space)  # validates positivity for raw Kd
    return DatasetRecord(smiles=smiles, protein_seq=prot,
                         affinity=affinity, affinity_space=space)


def kfold_split(records, folds, seed):
    """Deterministic (train, valid) index partitions; folds of size +-1."""
    n = len(records)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > n:
        raise TooFewRecords(f"cannot split {n} records into {folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    chunks = np.array_split(perm, folds)
    splits = []
    for i, chunk in enumerate(chunks):
        valid = np.sort(chunk)
        train = np.sort(np.concatenate([c for j, c in enumerate(chunks) if j != i]))
        splits.append((train.tolist(), valid.tolist()))
    return splits


@dataclass
class FeaturizerCache:
    """Per-unique-SMILES/-sequence featurization, reused across epochs."""
    use_virtual_node: bool = True
    k_pe: int = 8
    l_p: int = 1000
    graphs: dict = field(default_factory=dict)
    encodings: dict = field(default_factory=dict)

    def graph_for(self, smiles):
        if smiles not in self.graphs:
            mol = parse_smiles(smiles)
            self.graphs[smiles] = build_graph(
                mol, use_virtual_node=self.use_virtual_node, k_pe=self.k_pe)
        return self.graphs[smiles]

    def encoding_for(self, seq):
        if seq not in self.encodings:
            self.encodings[seq] = encode_sequence(seq, max_len=self.l_p)
        return self.encodings[seq]


def featurize_records(records, config, workers: int = 1):
    """Turn DatasetRecords into model Samples (graphs + codes + targets).

    Featurization failures abort with the offending record identified.
    ``workers`` > 1 fans the unique-SMILES graph builds out over processes.
    """
    cache = FeaturizerCache(use_virtual_node=config.use_virtual_node,
                            k_pe=config.k_pe if config.use_pe else 0,
                            l_p=config.l_p)
    if workers > 1:
        _prefill_graphs(cache, records, workers)
    samples = []
    for idx, rec in enumerate(records):
        try:
            graph = cache.graph_for(rec.smiles)
            codes = cache.encoding_for(rec.protein_seq)
            target = rec.target if math.isfinite(rec.affinity) else float("nan")
        except Exception as exc:
            raise FeaturizationError(idx, rec.smiles, str(exc)) from exc
        samples.append(Sample(graph=graph, codes=codes, target=target, index=idx))
    return samples


def _build_graph_task(args):
    smiles, use_vn, k_pe = args
    return smiles, build_graph(parse_smiles(smiles),
                               use_virtual_node=use_vn, k_pe=k_pe)


def _prefill_graphs(cache, records, workers):
    import multiprocessing

    unique = sorted({r.smiles for r in records})
    tasks = [(s, cache.use_virtual_node, cache.k_pe) for s in unique]
    with multiprocessing.Pool(workers) as pool:
        for smiles, graph in pool.map(_build_graph_task, tasks):
            cache.graphs[smiles] = graph
