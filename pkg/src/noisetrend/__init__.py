"""noisetrend: pixel-level anomaly detection from denoising trends across a noise sweep."""

from .data import (DatasetManifest, DefectRecipe, SyntheticSpec, generate_synthetic,
                   load_dataset)
from .codec import read_image, write_image
from .errors import (ConfigurationError, DecodeError, FormatError, LayoutError,
                     MetricUndefinedError, NoisetrendError, NumericError)
from .image import Image
from .metrics import MetricsReport, aggregate, auroc, average_precision, compare
from .model import (ArchDescriptor, DenoiserModel, TrainingConfig, init_model,
                    input_gradient, load_checkpoint, predict_x0, save_checkpoint, train)
from .rng import RandomStream
from .sweep import NoiseSchedule, TrendStack, corrupt, dump_stack, make_schedule, sweep
from .trend import (DetectionResult, ScoreMap, TrendMap, baseline_score, detect, fuse,
                    normalize01, save_score_map, second_fourier_magnitude, trend_map)

__version__ = "0.1.0"

__all__ = [
    "ArchDescriptor", "ConfigurationError", "DatasetManifest", "DecodeError",
    "DefectRecipe", "DenoiserModel", "DetectionResult", "FormatError", "Image",
    "LayoutError", "MetricUndefinedError", "MetricsReport", "NoiseSchedule",
    "NoisetrendError", "NumericError", "RandomStream", "ScoreMap", "SyntheticSpec",
    "TrainingConfig", "TrendMap", "TrendStack", "aggregate", "auroc",
    "average_precision", "baseline_score", "compare", "corrupt", "detect",
    "dump_stack", "fuse", "generate_synthetic", "init_model", "input_gradient",
    "load_checkpoint", "load_dataset", "make_schedule", "normalize01", "predict_x0",
    "read_image", "save_checkpoint", "save_score_map", "second_fourier_magnitude",
    "sweep", "train", "trend_map", "write_image", "__version__",
]
