"""Multi-view pod counting on synthetic field passes."""

import json

from ._podcount import (
    PodcountError,
    __version__,
    classification_metrics,
    dataset_stats,
    iou,
    pearson,
    ranking_report,
    select_frames,
    selection_size,
    spearman,
    top_fraction_selection,
)
from . import _podcount


def default_config():
    """Default pipeline configuration as a dict."""
    return json.loads(_podcount.default_config_json())


def simulate_counts(config=None):
    """(plot_id, true pod count) pairs of a simulated field."""
    return _podcount.simulate_counts(json.dumps(config or {}))


def run_experiment(config=None):
    """Run the pipeline in memory; one result dict per views-per-side setting."""
    return _podcount.run_experiment(json.dumps(config or {}))


def run_pipeline(config, out_dir):
    """Run the file-based pipeline; returns the run directories."""
    return _podcount.run_pipeline(json.dumps(config or {}), str(out_dir))


__all__ = [
    "PodcountError",
    "__version__",
    "classification_metrics",
    "dataset_stats",
    "default_config",
    "iou",
    "pearson",
    "ranking_report",
    "run_experiment",
    "run_pipeline",
    "select_frames",
    "selection_size",
    "simulate_counts",
    "spearman",
    "top_fraction_selection",
]
