"""qspike: a spiking classical front-end feeding a small variational
quantum circuit, trained end to end and benchmarked under image
corruptions."""

from .model import ModelConfig, SpikingQuantumClassifier, forward, backward, predict
from .train import TrainConfig, fit, evaluate, save_checkpoint, load_checkpoint

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "SpikingQuantumClassifier",
    "forward",
    "backward",
    "predict",
    "TrainConfig",
    "fit",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
    "__version__",
]
