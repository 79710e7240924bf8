from .activations import ACTIVATIONS, get_activation
from .layers import Conv2D, Dense, Dropout, Flatten, Layer, Pool2D, Reshape
from .network import Network, conv_network, dense_network, interpolate_widths
from .optim import SGD, Adam
from .training import TrainConfig, TrainResult, mse, train_network

__all__ = [
    "ACTIVATIONS", "Adam", "Conv2D", "Dense", "Dropout", "Flatten", "Layer", "Network", "Pool2D",
    "Reshape", "SGD", "TrainConfig", "TrainResult", "conv_network", "dense_network",
    "get_activation", "interpolate_widths", "mse", "train_network",
]
