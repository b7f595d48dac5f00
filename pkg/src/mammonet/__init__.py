"""From-scratch CNN engine and CLI for three-class mammogram classification."""

from .errors import (ConfigurationError, DimensionError, FormatError,
                     InputError, MammonetError, NumericError, StateError)
from .network import (INPUT_SHAPE, NUM_CLASSES, NetworkModel,
                      build_model, build_reference_model, forward, backward,
                      render_summary)
from .training import (AdamState, Checkpoint, EpochLog, TrainConfig,
                       adam_step, load_checkpoint, save_checkpoint,
                       split_dataset, train)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DimensionError", "FormatError", "InputError",
    "MammonetError", "NumericError", "StateError",
    "INPUT_SHAPE", "NUM_CLASSES", "NetworkModel", "build_model",
    "build_reference_model", "forward", "backward", "render_summary",
    "AdamState", "Checkpoint", "EpochLog", "TrainConfig", "adam_step",
    "load_checkpoint", "save_checkpoint", "split_dataset", "train",
    "__version__",
]
