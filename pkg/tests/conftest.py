import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sample_csv():
    return DATA_DIR / "sample.csv"


@pytest.fixture
def smiles_fixture_rows():
    rows = []
    lines = (DATA_DIR / "smiles_fixture.csv").read_text().strip().splitlines()
    for line in lines[1:]:
        smiles, atoms, bonds, aromatic, ring = line.split(",")
        rows.append((smiles, int(atoms), int(bonds), int(aromatic), int(ring)))
    return rows
