"""Two-view contrastive sequential recommendation."""

from .config import TrainConfig
from .corpus import DatasetSplit, Vocab, apply_k_core, build_split, load_interactions
from .item_graph import ItemGraph, build_graph, propagate
from .model import MVCRec
from .trainer import ablate, sweep, train

__version__ = "0.1.0"

__all__ = [
    "DatasetSplit",
    "ItemGraph",
    "MVCRec",
    "TrainConfig",
    "Vocab",
    "ablate",
    "apply_k_core",
    "build_graph",
    "build_split",
    "load_interactions",
    "propagate",
    "sweep",
    "train",
]
