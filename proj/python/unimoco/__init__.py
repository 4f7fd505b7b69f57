"""Contrastive representation learning with label and feature queues.

Thin Python front end over the C++ core. Configs may be passed as dicts or
JSON text; arrays are numpy float64.
"""

from ._unimoco import (
    ConfigError,
    DivergenceError,
    Error,
    FormatError,
    PairQueue,
    __version__,
    config_digest,
    generate_dataset,
    knn_probe,
    linear_probe,
    load_checkpoint,
    load_dataset,
    log_sum_exp,
    loss,
    loss_kinds,
    losscheck,
    parse_config,
    pretrain,
    probe,
    save_dataset,
    softplus,
    triplet_pair,
    trunk_features,
)

UNLABELED = -1

__all__ = [
    "ConfigError",
    "DivergenceError",
    "Error",
    "FormatError",
    "PairQueue",
    "UNLABELED",
    "__version__",
    "config_digest",
    "generate_dataset",
    "knn_probe",
    "linear_probe",
    "load_checkpoint",
    "load_dataset",
    "log_sum_exp",
    "loss",
    "loss_kinds",
    "losscheck",
    "parse_config",
    "pretrain",
    "probe",
    "save_dataset",
    "softplus",
    "triplet_pair",
    "trunk_features",
]
