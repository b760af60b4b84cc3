"""Ordering-ID subspace workbench.

Thin Python surface over the C++ core: configuration, the staged pipeline
(gen/train/capture/fit/intervene/report), the acceptance suite, and a few
numeric helpers (Spearman, PCA, dataset generation).
"""

from oisub._core import (  # noqa: F401
    ConfigError,
    FormatError,
    InputError,
    NumericError,
    StageError,
    Vocabulary,
    build_vocabulary,
    cmd_capture,
    cmd_fit,
    cmd_gen,
    cmd_intervene,
    cmd_report,
    cmd_train,
    config_hash,
    default_config,
    gen_base,
    pca,
    pearson,
    run_acceptance,
    run_pipeline,
    spearman,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "InputError",
    "NumericError",
    "StageError",
    "Vocabulary",
    "build_vocabulary",
    "cmd_capture",
    "cmd_fit",
    "cmd_gen",
    "cmd_intervene",
    "cmd_report",
    "cmd_train",
    "config_hash",
    "default_config",
    "gen_base",
    "pca",
    "pearson",
    "run_acceptance",
    "run_pipeline",
    "spearman",
]
