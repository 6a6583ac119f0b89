import os
from pathlib import Path

import pytest

from pnc.graph import Corpus
from pnc.synthetic import SyntheticSpec, clique, path, sample_undirected, triangle
from pnc.trainer import TrainConfig, train
from pnc.tudataset import load_corpus

DATA = Path(__file__).parent / "data"
MUTAG_DIR = DATA / "MUTAG"


def external_dataset(name: str) -> Path | None:
    """Path of a TU dataset under $PNC_DATA_DIR, or None when absent."""
    root = os.environ.get("PNC_DATA_DIR")
    if root and (Path(root) / name).is_dir():
        return Path(root) / name
    return None


def mixed_synthetic(count: int = 1000, seed: int = 0) -> list:
    """ER, SBM and planted-dictionary samples in roughly equal parts."""
    third = count // 3
    specs = [
        SyntheticSpec("er", samples=third, seed=seed, n=16, p_edge=0.15),
        SyntheticSpec("sbm", samples=third, seed=seed + 1, sizes=(5, 4, 6), p_in=0.7, p_out=0.05),
        SyntheticSpec("planted", samples=count - 2 * third, seed=seed + 2,
                      atoms=[triangle(), clique(4), path(4)], atoms_per_graph=(2, 8),
                      noise_edges=2.0, null_fraction=0.15, null_size=5),
    ]
    out = []
    for s in specs:
        out.extend(x.graph for x in sample_undirected(s))
    return out


@pytest.fixture(scope="session")
def mutag() -> Corpus:
    return load_corpus(MUTAG_DIR)


@pytest.fixture(scope="session")
def mutag_trained(mutag):
    return train(mutag, TrainConfig(epochs=100, seed=0), "modularity")


@pytest.fixture(scope="session")
def synthetic_graphs():
    return mixed_synthetic(1000)


@pytest.fixture(scope="session")
def synthetic_trained(synthetic_graphs):
    corpus = Corpus(synthetic_graphs, name="synthetic-mixed")
    return corpus, train(corpus, TrainConfig(epochs=30, seed=0), "modularity")


# acceptance lines collected by test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
