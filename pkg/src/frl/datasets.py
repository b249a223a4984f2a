"""
Bundled benchmark data.
"""

from __future__ import annotations

from importlib import resources

from .io import BinarizationConfig, ingest_csv

__all__ = ["mammographic_path", "MAMMOGRAPHIC_CONFIG", "load_mammographic"]

# BI-RADS is an assessment made from the same images and is not a predictor.
MAMMOGRAPHIC_CONFIG = BinarizationConfig(
    mode="auto",
    categorical=("shape", "margin"),
    numeric=("age", "density"),
    drop=("birads",),
    level_names={
        "shape": {"1": "round", "2": "oval", "3": "lobular", "4": "irregular"},
        "margin": {"1": "circumscribed", "2": "microlobulated", "3": "obscured",
                   "4": "ill-defined", "5": "spiculated"},
    },
)
MAMMOGRAPHIC_LABEL = "severity"


def mammographic_path():
    return resources.files("frl") / "data" / "mammographic.csv"


def load_mammographic():
    """Complete-case Mammographic Mass data, binarized.

    Returns ``(dataset, binarizer)``; the label is malignancy.
    """
    with resources.as_file(mammographic_path()) as path:
        return ingest_csv(path, MAMMOGRAPHIC_LABEL, MAMMOGRAPHIC_CONFIG)
