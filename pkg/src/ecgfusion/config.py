"""Experiment configuration: JSON file merged over defaults and validated against
the bundled JSON schema (``config_schema.json``)."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .models import TrainConfig

DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "out",
    "dataset": {
        "source": "synthetic",
        "path": "",
        "records": [],
        "exclude": [],
        "lead": "II",
        "lead_index": None,
        "classes": ["N", "S", "V", "F", "Q"],
        "L": 187,
        "pre_ms": 250.0,
        "post_ms": 400.0,
        "split_mode": "stratified",
        "train_ratio": 0.8,
        "smote_k": 5,
        "smoke": False,
        "synthetic_records": 2,
        "synthetic_beats": 600,
    },
    "gaf": {"range": [0, 1], "res": 16},
    "models": {
        "rnn": {"hidden_size": 32, "dense": [64, 32], "stride": 4},
        "mlp": {"hidden": [128, 64]},
        "train": {"lr": 1e-3, "batch_size": 32, "max_epochs": 30, "patience": 5, "val_fraction": 0.1},
    },
    "fusion": {"conflict_reduction": "sum", "renormalize": False},
    "metrics": {"average": "macro", "sweep_metric": "accuracy"},
    "sweep": {"snrs": [15, 10, 5, 0], "kinds": ["awgn", "bw", "ma", "em"], "nstdb_dir": "", "workers": 4},
}


def schema() -> dict:
    return json.loads(resources.files("ecgfusion").joinpath("config_schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config error at {e.json_path}: {e.message}")


def load_config(source: str | Path | dict | None = None, **overrides) -> dict:
    """Defaults <- file or dict <- keyword overrides (top-level keys), then validate."""
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    validate(doc)
    cfg = _merge(DEFAULTS, doc)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    validate(cfg)
    return cfg


def train_config(cfg: dict, seed_offset: int = 0) -> TrainConfig:
    t = cfg["models"]["train"]
    return TrainConfig(
        lr=t["lr"],
        batch_size=t["batch_size"],
        max_epochs=t["max_epochs"],
        patience=t["patience"],
        val_fraction=t["val_fraction"],
        seed=cfg["seed"] + seed_offset,
    )
