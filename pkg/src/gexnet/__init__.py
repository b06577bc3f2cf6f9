"""Hard-constraint neural networks for the molar excess Gibbs energy of
binary mixtures, with activity coefficients from exact differentiation.

The package provides the model architecture with its structural
thermodynamic guarantees (pure-component limits, Gibbs-Duhem coupling,
pseudo-binary zeros, permutation equivariance), a self-contained
differentiation engine, descriptor handling, classical VLE utilities
with analytic reference models, training and evaluation, and a CLI.
"""

from .autodiff import DualScalar, Node, Tape
from .data import (
    GammaRecord,
    SplitSpec,
    StandardizationStats,
    apply_standardizer,
    fit_standardizer,
    ingest_csv,
    split_systems,
    standardize_temperature,
    system_id_for,
    write_dataset_csv,
)
from .descriptors import (
    ComponentDescriptor,
    DescriptorTable,
    build_feature_table,
    featurize,
    load_descriptor_table,
    tokenize_smiles,
    write_descriptor_table,
)
from .errors import (
    CheckpointError,
    DataValidationError,
    DegenerateEmbeddingError,
    DomainError,
    GexnetError,
    SmilesParseError,
    TableFormatError,
    TrainingDivergedError,
    UnitMismatchError,
)
from .evaluate import (
    consistency_certificate,
    cumulative_fraction,
    gibbs_duhem_msd,
    predict_records,
    system_mae,
)
from .model import (
    ArchitectureConfig,
    Checkpoint,
    GammaPrediction,
    cosine_distance,
    embed_component,
    init_parameters,
    load_checkpoint,
    predict_gammas,
    predict_slots,
    save_checkpoint,
)
from .thermo import (
    AntoineParams,
    Pressure,
    ReferenceGeModel,
    antoine_pressure,
    bubble_point_isothermal,
    gamma_from_vle,
    reference_gammas,
    synthesize_dataset,
)
from .train import FitResult, TrainConfig, fit, smooth_l1

__version__ = "0.1.0"

__all__ = [
    "ArchitectureConfig", "AntoineParams", "Checkpoint", "CheckpointError",
    "ComponentDescriptor", "DataValidationError", "DegenerateEmbeddingError",
    "DescriptorTable", "DomainError", "DualScalar", "FitResult", "GammaPrediction",
    "GammaRecord", "GexnetError", "Node", "Pressure", "ReferenceGeModel",
    "SmilesParseError", "SplitSpec", "StandardizationStats", "TableFormatError",
    "Tape", "TrainConfig", "TrainingDivergedError", "UnitMismatchError",
    "antoine_pressure", "apply_standardizer", "bubble_point_isothermal",
    "build_feature_table", "consistency_certificate", "cosine_distance",
    "cumulative_fraction", "embed_component", "featurize", "fit",
    "fit_standardizer", "gamma_from_vle", "gibbs_duhem_msd", "ingest_csv",
    "init_parameters", "load_checkpoint", "load_descriptor_table",
    "predict_gammas", "predict_records", "predict_slots", "reference_gammas",
    "save_checkpoint", "smooth_l1", "split_systems", "standardize_temperature",
    "synthesize_dataset", "system_id_for", "system_mae", "tokenize_smiles",
    "write_dataset_csv", "write_descriptor_table",
]
