"""Python bindings for the ipqgr library."""

import json

from ._core import (
    Codebook,
    CorruptionError,
    FormatError,
    InvalidStateError,
    RandomSource,
    build_base_codebook,
    classify,
    continual_metrics,
    hits_at,
    ingest_session,
    mrr_at,
    quantization_error,
    quantize,
    reconstruct,
    variant_names,
)
from . import _core


def default_config():
    return json.loads(_core.default_config())


def _dump(config):
    return config if isinstance(config, str) else json.dumps(config)


def run_experiment(config=None):
    """Runs every session on synthetic data and returns the report dict."""
    return json.loads(_core.run_experiment(_dump(config or {})))


class Experiment(_core.Experiment):
    def __init__(self, config=None):
        super().__init__(_dump(config or {}))

    def report(self):
        return json.loads(super().report())


__all__ = [
    "Codebook",
    "CorruptionError",
    "Experiment",
    "FormatError",
    "InvalidStateError",
    "RandomSource",
    "build_base_codebook",
    "classify",
    "continual_metrics",
    "default_config",
    "hits_at",
    "ingest_session",
    "mrr_at",
    "quantization_error",
    "quantize",
    "reconstruct",
    "run_experiment",
    "variant_names",
]
