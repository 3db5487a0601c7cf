"""JSON run configuration: defaults, strict validation, and hashing.

Defaults mirror the published training recipe: 8-30 Hz band, 500-sample
windows, stage-1 Adam at lr 0.005 / batch 32 / 20 epochs, stage-2 Adam at
lr 0.001 / 2 sequences per batch / 6 epochs, 15 seeds. Unknown keys are
rejected so typos cannot silently fall back to defaults. The config hash
covers every scientifically meaningful section but not filesystem paths,
letting a moved output directory still resume its evaluation grid.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .evaluation import ARMS
from .exceptions import ConfigError
from .training import Stage1Config, Stage2Config

__all__ = ["DEFAULT_CONFIG", "RunConfig"]

DEFAULT_CONFIG: dict = {
    "data": {
        "cohort_dir": None,  # directory of recording CSV + JSON sidecar pairs
        "cache_file": None,  # optional windowed-sequence cache location
    },
    "output": {
        "dir": "runs/latest",
    },
    "preprocess": {
        "band_low_hz": 8.0,
        "band_high_hz": 30.0,
        "filter_order": 4,
        "window_len": 500,
    },
    "stage1": {
        "lr": 0.005,
        "batch_size": 32,
        "epochs": 20,
    },
    "stage2": {
        "lr": 0.001,
        "batch_size": 2,
        "epochs": 6,
        "reuse_stage1_class_weights": True,
    },
    "train": {
        "seed": 0,
        "holdout": None,  # optional patient id excluded from training
    },
    "eval": {
        "seeds": list(range(15)),
        "arms": list(ARMS),
        "workers": 1,
    },
}

# Sections whose values change the science of a run (and thus the hash).
_HASHED_SECTIONS = ("preprocess", "stage1", "stage2", "train", "eval")


def _require_number(section: str, key: str, value, positive: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{section}.{key} must be positive, got {value}")
    return float(value)


def _require_int(section: str, key: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{section}.{key} must be >= {minimum}, got {value}")
    return value


class RunConfig:
    """Validated view over a (possibly partial) JSON config document."""

    def __init__(self, document: dict | None = None):
        merged = copy.deepcopy(DEFAULT_CONFIG)
        document = document or {}
        if not isinstance(document, dict):
            raise ConfigError(f"config root must be an object, got {type(document).__name__}")
        unknown = sorted(set(document) - set(merged))
        if unknown:
            raise ConfigError(f"unknown config section(s): {unknown}")
        for section, values in document.items():
            if not isinstance(values, dict):
                raise ConfigError(f"config section {section!r} must be an object")
            bad_keys = sorted(set(values) - set(merged[section]))
            if bad_keys:
                raise ConfigError(f"unknown key(s) in {section!r}: {bad_keys}")
            merged[section].update(copy.deepcopy(values))
        self._doc = merged
        self._validate()

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            document = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls(document)

    def _validate(self) -> None:
        d = self._doc
        pre = d["preprocess"]
        low = _require_number("preprocess", "band_low_hz", pre["band_low_hz"])
        high = _require_number("preprocess", "band_high_hz", pre["band_high_hz"])
        if low >= high:
            raise ConfigError(
                f"preprocess band must satisfy low < high, got ({low}, {high})"
            )
        _require_int("preprocess", "filter_order", pre["filter_order"])
        _require_int("preprocess", "window_len", pre["window_len"])

        _require_number("stage1", "lr", d["stage1"]["lr"])
        _require_int("stage1", "batch_size", d["stage1"]["batch_size"])
        _require_int("stage1", "epochs", d["stage1"]["epochs"])
        _require_number("stage2", "lr", d["stage2"]["lr"])
        _require_int("stage2", "batch_size", d["stage2"]["batch_size"])
        _require_int("stage2", "epochs", d["stage2"]["epochs"])
        if not isinstance(d["stage2"]["reuse_stage1_class_weights"], bool):
            raise ConfigError("stage2.reuse_stage1_class_weights must be a boolean")

        if not isinstance(d["train"]["seed"], int) or isinstance(d["train"]["seed"], bool):
            raise ConfigError(f"train.seed must be an integer, got {d['train']['seed']!r}")
        holdout = d["train"]["holdout"]
        if holdout is not None and not isinstance(holdout, str):
            raise ConfigError(f"train.holdout must be a patient id string, got {holdout!r}")

        ev = d["eval"]
        if not isinstance(ev["seeds"], list) or not ev["seeds"]:
            raise ConfigError("eval.seeds must be a non-empty list of integers")
        for s in ev["seeds"]:
            if not isinstance(s, int) or isinstance(s, bool):
                raise ConfigError(f"eval.seeds entries must be integers, got {s!r}")
        if len(set(ev["seeds"])) != len(ev["seeds"]):
            raise ConfigError("eval.seeds contains duplicates")
        if not isinstance(ev["arms"], list) or not ev["arms"]:
            raise ConfigError("eval.arms must be a non-empty list")
        bad_arms = sorted(set(ev["arms"]) - set(ARMS))
        if bad_arms:
            raise ConfigError(f"unknown eval arm(s): {bad_arms} (choose from {list(ARMS)})")
        _require_int("eval", "workers", ev["workers"])

        for section in ("data", "output"):
            for key, value in d[section].items():
                if value is not None and not isinstance(value, str):
                    raise ConfigError(f"{section}.{key} must be a string path or null")

    # -- access ----------------------------------------------------------------

    def __getitem__(self, section: str) -> dict:
        return copy.deepcopy(self._doc[section])

    def as_dict(self) -> dict:
        return copy.deepcopy(self._doc)

    def stage1_config(self, adversarial: bool = True) -> Stage1Config:
        s = self._doc["stage1"]
        return Stage1Config(
            lr=s["lr"], batch_size=s["batch_size"], epochs=s["epochs"],
            adversarial=adversarial,
        )

    def stage2_config(self) -> Stage2Config:
        s = self._doc["stage2"]
        return Stage2Config(
            lr=s["lr"], batch_size=s["batch_size"], epochs=s["epochs"],
            reuse_stage1_class_weights=s["reuse_stage1_class_weights"],
        )

    def config_hash(self) -> str:
        hashed = {k: self._doc[k] for k in _HASHED_SECTIONS}
        payload = json.dumps(hashed, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()
