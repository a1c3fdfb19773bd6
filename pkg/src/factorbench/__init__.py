"""factorbench: deterministic diagnostic vision benchmarks.

Renders single-object images controlled by six independent factors of
variation, assembles datasets with precisely controlled shortcut and
generalization opportunities, and scores predictors with factor-aggregated
metrics. A built-in gradient-checked probe classifier demonstrates
shortcut learning end to end at desk scale.
"""

from .assets import ShapeBank, TextureBank, load_mnist, load_textures, sample_crop
from .dataset_io import (
    DatasetManifest,
    PredictionFile,
    export,
    read_predictions,
    write_predictions,
)
from .errors import FactorbenchError
from .factors import (
    FACTORS,
    Factor,
    FactorClassTable,
    FactorRealization,
    class_of,
    contains,
    default_table,
    sample_realization,
)
from .metrics import MetricsReport, build_report, mean_per_class_accuracy
from .probe import ProbeClassifier, ProbeConfig, grad_check
from .render import colorize, hsl_to_rgb, render
from .study import (
    CellPattern,
    DatasetSample,
    Pairing,
    SplitCounts,
    StudyKind,
    cell_pattern,
    enumerate_pairings,
    materialize_split,
    select_dataset_samples,
)

__version__ = "0.1.0"

__all__ = [
    "FACTORS",
    "Factor",
    "FactorClassTable",
    "FactorRealization",
    "FactorbenchError",
    "CellPattern",
    "DatasetManifest",
    "DatasetSample",
    "MetricsReport",
    "Pairing",
    "PredictionFile",
    "ProbeClassifier",
    "ProbeConfig",
    "ShapeBank",
    "SplitCounts",
    "StudyKind",
    "TextureBank",
    "build_report",
    "cell_pattern",
    "class_of",
    "colorize",
    "contains",
    "default_table",
    "enumerate_pairings",
    "export",
    "grad_check",
    "hsl_to_rgb",
    "load_mnist",
    "load_textures",
    "materialize_split",
    "mean_per_class_accuracy",
    "read_predictions",
    "render",
    "sample_crop",
    "sample_realization",
    "select_dataset_samples",
    "write_predictions",
    "__version__",
]
