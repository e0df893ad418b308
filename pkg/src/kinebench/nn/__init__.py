"""From-scratch neural network stack (numpy only)."""

from .adam import (AdamState, BETA1, BETA2, EPS_HAT, LEARNING_RATE, adam_step,
                   init_adam)
from .checkpoint import (CheckpointError, load_checkpoint, load_optimizer,
                         save_checkpoint, save_optimizer)
from .layers import (Conv2D, Dense, Dropout, Flatten, MaxPool2D, NNError,
                     relu, set_debug_finite, sigmoid)
from .model import (BCE_EPSILON, CONV_FILTERS, DROPOUT_RATE, INPUT_CHANNELS,
                    INPUT_SIZE, Table1Model, bce_loss, build_table1_model)

__all__ = [
    "AdamState", "BETA1", "BETA2", "EPS_HAT", "LEARNING_RATE", "adam_step",
    "init_adam", "CheckpointError", "load_checkpoint", "load_optimizer",
    "save_checkpoint", "save_optimizer", "Conv2D", "Dense", "Dropout",
    "Flatten", "MaxPool2D", "NNError", "relu", "set_debug_finite", "sigmoid",
    "BCE_EPSILON", "CONV_FILTERS", "DROPOUT_RATE", "INPUT_CHANNELS",
    "INPUT_SIZE", "Table1Model", "bce_loss", "build_table1_model",
]
