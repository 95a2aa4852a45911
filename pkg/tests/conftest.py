from pathlib import Path

import pytest

from mvcrec.corpus import apply_k_core, build_split
from mvcrec.item_graph import build_graph
from mvcrec.synthetic import cyclic_log

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def cyclic():
    log = apply_k_core(cyclic_log())
    vocab, split = build_split(log, max_len=50)
    graph = build_graph(split.train, vocab.num_items, z=3)
    return vocab, split, graph


@pytest.fixture(scope="session")
def tiny_data():
    """60 users, 20 items, short histories: fast enough for repeated training."""
    log = apply_k_core(cyclic_log(num_users=60, num_items=20, min_len=5, max_len=9, seed=3))
    vocab, split = build_split(log, max_len=8)
    graph = build_graph(split.train, vocab.num_items, z=3)
    return vocab, split, graph


@pytest.fixture(scope="session")
def ml100k_path():
    return DATA / "ml-100k.tsv.gz"
