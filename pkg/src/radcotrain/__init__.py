"""Dual-view co-training for sectioned radiology-style reports."""

from radcotrain.corpus import (
    LabelSpace,
    LabeledDataset,
    Report,
    UnlabeledDataset,
    concat_views,
    load_labeled,
    load_unlabeled,
    split_k_folds,
)
from radcotrain.sections import SectionLayout, detect_headings, parse_report

__version__ = "0.1.0"

__all__ = [
    "LabelSpace",
    "LabeledDataset",
    "Report",
    "SectionLayout",
    "UnlabeledDataset",
    "concat_views",
    "detect_headings",
    "load_labeled",
    "load_unlabeled",
    "parse_report",
    "split_k_folds",
]
