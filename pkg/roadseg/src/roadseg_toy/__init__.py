"""roadseg-toy: desk-scale two-encoder road segmentation with a
densely-connected decoder, trained on normal-forge outputs."""

from .data import Sample, generate_toy_dataset, load_dataset, load_sample
from .ladder import ChannelLadder
from .metrics import (
    confusion_counts,
    five_scores,
    format_report,
    fscore,
    threshold_sweep,
    write_report,
)
from .model import RoadSegToy, build_model, parameter_count
from .train import History, TrainConfig, eval_toy, train_toy

__version__ = "0.1.0"

__all__ = [
    "ChannelLadder", "RoadSegToy", "build_model", "parameter_count",
    "Sample", "load_sample", "load_dataset", "generate_toy_dataset",
    "TrainConfig", "History", "train_toy", "eval_toy",
    "confusion_counts", "five_scores", "fscore", "threshold_sweep",
    "format_report", "write_report",
    "__version__",
]
