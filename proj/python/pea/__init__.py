"""ReLU/smooth activation ensembles trained on a schedule that ends at plain ReLU."""

import json as _json

from . import _pea
from ._pea import (
    CollapseError,
    ConfigError,
    ContractError,
    ExportedModel,
    LoadError,
    NumericError,
    activate,
    alpha_at,
    export_checkpoint,
    grad_suite,
    label_smoothed_cross_entropy,
    preset_names,
    schedule_csv,
    stochastic_ensemble,
    weighted_ensemble,
)


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config)


def preset(name, epochs=24):
    """Preset experiment config as a dict."""
    return _json.loads(_pea.preset_json(name, epochs))


def validate_config(config):
    """Fully resolved config dict; raises ConfigError naming the bad field."""
    return _json.loads(_pea.validate_config(_dump(config)))


def learning_rates(config):
    return _pea.learning_rates(_dump(config))


def run_experiment(config, runs=1, output_dir=""):
    """Train `runs` seeds; returns the summary dict."""
    return _json.loads(_pea.run_experiment(_dump(config), runs, str(output_dir)))


def inspect_checkpoint(path):
    return _json.loads(_pea.inspect_checkpoint(str(path)))


__all__ = [
    "CollapseError", "ConfigError", "ContractError", "ExportedModel", "LoadError", "NumericError",
    "activate", "alpha_at", "export_checkpoint", "grad_suite", "inspect_checkpoint",
    "label_smoothed_cross_entropy", "learning_rates", "preset", "preset_names", "run_experiment",
    "schedule_csv", "stochastic_ensemble", "validate_config", "weighted_ensemble",
]
