# SPDX-License-Identifier: Apache-2.0
"""Python access to the prunepath core.

Configs are plain dicts in the same layout as the CLI's JSON config.
"""

import json

from . import _prunepath
from ._prunepath import (
    ArgumentError,
    CollinearityError,
    ConfigError,
    DependencyError,
    Error,
    gamma_from_inverse,
    lookup_table,
    majority_vote,
    predict_inverse_gamma,
    soft_bce_loss,
    token_reduction,
)

__all__ = [
    "ArgumentError",
    "CollinearityError",
    "ConfigError",
    "DependencyError",
    "Error",
    "fit_powerlaw",
    "gamma_from_inverse",
    "label_and_train",
    "lookup_table",
    "majority_vote",
    "predict_inverse_gamma",
    "resolve_config",
    "run_command",
    "run_pipeline",
    "sample_queries",
    "soft_bce_loss",
    "token_reduction",
]


def _config(config):
    doc = dict(config or {})
    doc.setdefault("backend", {"sim": {}})
    return json.dumps(doc)


def resolve_config(config=None):
    return json.loads(_prunepath.resolve_config(_config(config)))


def fit_powerlaw(rows):
    return json.loads(_prunepath.fit_powerlaw(list(rows)))


def sample_queries(config=None, count=10):
    return [json.loads(q) for q in _prunepath.sample_queries(_config(config), count)]


def run_pipeline(config=None, query_count=10, prune=True, model=None):
    model_json = json.dumps(model) if model is not None else ""
    return json.loads(_prunepath.run_pipeline(_config(config), query_count, prune, model_json))


def label_and_train(config=None, query_count=50):
    return json.loads(_prunepath.label_and_train(_config(config), query_count))


def run_command(name, config=None):
    """Runs a CLI subcommand and returns its summary line."""
    return _prunepath.run_command(name, _config(config)).strip()
