"""Stochastic deep unfolding (SGD-Net) for imaging inverse problems."""

import json as _json

from ._sgdnet import *  # noqa: F401,F403
from ._sgdnet import (
    default_config as _default_config,
    load_problem as _load_problem,
    normalize_config as _normalize_config,
    pretrain as _pretrain,
    train as _train,
)


def _as_text(config):
    if config is None:
        return _default_config()
    if isinstance(config, dict):
        return _json.dumps(config)
    return config


def default_config():
    """Default experiment configuration as a dict."""
    return _json.loads(_default_config())


def normalize_config(config):
    """Validates a config (dict or JSON text) and fills in defaults."""
    return _json.loads(_normalize_config(_as_text(config)))


def load_problem(config=None):
    return _load_problem(_as_text(config))


def pretrain(problem, config=None):
    return _pretrain(_as_text(config), problem)


def train(problem, warm, config=None):
    """Returns (trained PriorNet, per-iteration losses)."""
    return _train(_as_text(config), problem, warm)
