"""Drug-target affinity prediction toolkit.

SMILES featurization with a virtual global node, a graph transformer drug
encoder with spectral positional encodings, a convolutional protein
encoder, gated attention fusion, and a regression head — on top of a
small tape-based autodiff engine with compiled hot kernels.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .data import DatasetRecord, kfold_split, load_dataset, transform_affinity
from .metrics import MetricsReport, concordance_index, mse, pearson, r_m_squared
from .model import AffinityModel, ModelConfig
from .molgraph import MolecularGraph, SpectralBasis, build_graph
from .protein import encode_sequence
from .smiles import Molecule, parse_smiles
from .train import TrainConfig, predict_batch, train

__all__ = [
    "AffinityModel", "DatasetRecord", "KERNEL_BACKEND", "MetricsReport",
    "ModelConfig", "MolecularGraph", "Molecule", "SpectralBasis",
    "TrainConfig", "build_graph", "concordance_index", "encode_sequence",
    "kfold_split", "load_dataset", "mse", "parse_smiles", "pearson",
    "predict_batch", "r_m_squared", "train", "transform_affinity",
]
