"""Quantum GAN toolkit: a dense statevector simulator, SWAP-test fidelity
training with parameter-shift gradients, trajectory noise, and experiment drivers."""

from iqgan.circuits import Ansatz, EncoderMode, EncoderParams, GeneratorParams, hardware_cost
from iqgan.errors import (
    ConfigError,
    DataError,
    IQGANError,
    NumericError,
    ValidationError,
)
from iqgan.noise import NoiseSpec
from iqgan.qsim import Circuit, Gate, StateVector, run_circuit
from iqgan.training import PretrainConfig, TrainConfig, pretrain_encoder, train_gan

__version__ = "0.1.0"

__all__ = [
    "Ansatz", "Circuit", "ConfigError", "DataError", "EncoderMode", "EncoderParams", "Gate",
    "GeneratorParams", "IQGANError", "NoiseSpec", "NumericError", "PretrainConfig",
    "StateVector", "TrainConfig", "ValidationError", "hardware_cost", "pretrain_encoder",
    "run_circuit", "train_gan",
]
