"""Dual-PQC quantum GAN: dense simulators, noise models, training and evaluation."""
from .circuit import AnsatzSpec, Gate, ParameterizedCircuit, build_ansatz, execute, to_qasm
from .data import ImageDataset, load_csv, save_csv, synth_calorimeter
from .errors import (
    ArgumentError,
    ConfigError,
    DualQGANError,
    LoadError,
    NumericError,
    ParseError,
    QubitIndexError,
    SizeError,
    ValidationError,
)
from .generator import EXACT, DualGenerator, GeneratedOutput, Mode, generate, parameter_shift_grad
from .harness import InferenceReport, RunResult, TrainingConfig, inference_test, noise_scan, train
from .metrics import d_kl_individual, d_kl_mean, kl_divergence, mode_collapse_score, summarize_repetitions
from .noise import DEVICE_PRESETS, NoiseModel, depolarizing_kraus

__version__ = "0.1.0"
