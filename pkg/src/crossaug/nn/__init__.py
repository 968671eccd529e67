from crossaug.nn.gradcheck import grad_check
from crossaug.nn.layers import Activation, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2x2
from crossaug.nn.losses import compute_loss
from crossaug.nn.network import Network, UsageError
from crossaug.nn.optim import Adam, adam_step
from crossaug.nn.serialize import load_weights, save_weights
from crossaug.nn.train import DivergenceError, History, TrainConfig, train

__all__ = [
    "Activation", "Adam", "Conv2D", "Dense", "DivergenceError", "Dropout", "Flatten",
    "History", "Layer", "MaxPool2x2", "Network", "TrainConfig", "UsageError",
    "adam_step", "compute_loss", "grad_check", "load_weights", "save_weights", "train",
]
