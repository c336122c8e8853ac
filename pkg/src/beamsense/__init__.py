"""Joint compressive channel sensing and RF beam selection for mmWave MIMO.

The package simulates geometric mmWave channels, labels them with
near-optimal hybrid-precoding beam selections from a perfect-CSI oracle,
trains a network whose first stage is structurally a compressive channel
measurement operator, and evaluates achievable rate and beam accuracy
against the perfect-CSI bound.
"""

from .channel import (
    ChannelSample,
    ClusterSpec,
    EnvironmentModel,
    PathParams,
    add_channel_noise,
    array_response_ula,
    build_channel,
    sample_environment,
)
from .codebook import Codebook, assemble_rf_matrix, build_dft_codebook, build_steering_codebook
from .config import ExperimentConfig, load_config, parse_config
from .datapipe import Dataset, generate_dataset, load_dataset, save_dataset, split
from .estimator import CompressiveBeamSelector
from .network import (
    AutoPrecoderParams,
    NetworkDims,
    NetworkOutput,
    encoder_forward,
    export_measurement_matrices,
    forward,
    load_checkpoint,
    precoder_forward,
    predict_beams,
    save_checkpoint,
)
from .oracle import (
    LinkBudget,
    PrecodingSolution,
    achievable_rate,
    exhaustive_rf_search,
    greedy_label_search,
    optimal_baseband,
)
from .sensing import (
    MeasurementMatrices,
    measure_matrix_form,
    measure_vector_form,
    random_measurements,
)
from .training import (
    TrainConfig,
    adam_step,
    backward,
    bce_multitask_loss,
    dataset_accuracy,
    sample_accuracy,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AutoPrecoderParams",
    "ChannelSample",
    "ClusterSpec",
    "Codebook",
    "CompressiveBeamSelector",
    "Dataset",
    "EnvironmentModel",
    "ExperimentConfig",
    "LinkBudget",
    "MeasurementMatrices",
    "NetworkDims",
    "NetworkOutput",
    "PathParams",
    "PrecodingSolution",
    "TrainConfig",
    "achievable_rate",
    "adam_step",
    "add_channel_noise",
    "array_response_ula",
    "assemble_rf_matrix",
    "backward",
    "bce_multitask_loss",
    "build_channel",
    "build_dft_codebook",
    "build_steering_codebook",
    "dataset_accuracy",
    "encoder_forward",
    "exhaustive_rf_search",
    "export_measurement_matrices",
    "forward",
    "generate_dataset",
    "greedy_label_search",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "measure_matrix_form",
    "measure_vector_form",
    "optimal_baseband",
    "parse_config",
    "precoder_forward",
    "predict_beams",
    "random_measurements",
    "sample_accuracy",
    "sample_environment",
    "save_checkpoint",
    "save_dataset",
    "split",
    "train",
]
