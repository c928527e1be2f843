"""Learned per-output scalar quantization with bit allocation for CSI feedback autoencoders."""
from .allocation import BitAllocation, allocate_bits
from .channels import ChannelParams, make_splits
from .errors import ConfigError, CorruptFileError, CsiQuantError, DataError, DimensionError, NumericalFault
from .evaluation import nmse_db, output_stats
from .quantizer import Codebook, CodebookBank, kmeans_1d, quantize_scalar, quantize_vector
from .training import Splits, TrainConfig, TrainedSystem, load_run, save_run, train

__version__ = "0.1.0"
