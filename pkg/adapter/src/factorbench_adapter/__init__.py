"""Dataset adapter for factorbench exports: manifests + PNGs in, numpy
arrays out, prediction CSVs back."""

from .dataset import AdapterError, ManifestDataset, open_dataset, write_predictions

__version__ = "0.1.0"

__all__ = ["AdapterError", "ManifestDataset", "open_dataset", "write_predictions", "__version__"]
