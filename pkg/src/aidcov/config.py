"""JSON run configuration with validation and ``key.path=value`` overrides."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .evaluation import EvalSettings, Protocol, SyntheticSpec
from .features import FeatureSpec
from .metrics import KernelKind, KernelSpec
from .pipeline import config_hash

__all__ = ["ConfigError", "Config", "default_config", "load_config", "apply_overrides"]


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    return {
        "feature": FeatureSpec().to_dict(),
        "kernel": KernelSpec(KernelKind.LOGE_LINEAR).to_dict(),
        "src_kernel": KernelSpec(KernelKind.LOGE_POLY).to_dict(),
        "nystrom": {"D": 40, "M": 60, "seed": 0, "refit_per_trial": True},
        "eps": 1e-3,
        "resize": [20, 20],
        "classifiers": {"cdl_ridge": 1e-3, "src_lambda": None},
        "protocol": Protocol().to_dict(),
        "synthetic": SyntheticSpec().to_dict(),
        "paths": {"dataset": None, "cache": "aidcov-cache", "output": "aidcov-out"},
        "jobs": None,
    }


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("kernel", "src_kernel"):
            out[k] = _merge(base[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class Config:
    """A validated configuration. ``raw`` is the full JSON document."""

    raw: dict
    feature: FeatureSpec
    kernel: KernelSpec
    src_kernel: KernelSpec
    protocol: Protocol
    synthetic: SyntheticSpec
    settings: EvalSettings

    @classmethod
    def from_dict(cls, doc: dict) -> "Config":
        raw = _merge(default_config(), doc)
        try:
            feature = FeatureSpec.from_dict(raw["feature"])
            kernel = KernelSpec.from_dict(raw["kernel"])
            src_kernel = KernelSpec.from_dict(raw["src_kernel"])
            protocol = Protocol(**raw["protocol"])
            synthetic = SyntheticSpec(**raw["synthetic"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        ny = raw["nystrom"]
        eps = raw["eps"]
        if not isinstance(eps, (int, float)) or eps < 0:
            raise ConfigError(f"eps must be a nonnegative number, got {eps!r}")
        for key in ("D", "M"):
            if not isinstance(ny[key], int) or ny[key] < 1:
                raise ConfigError(f"nystrom.{key} must be a positive integer")
        if ny["D"] > ny["M"]:
            raise ConfigError(f"nystrom.D ({ny['D']}) must not exceed nystrom.M ({ny['M']})")
        resize = raw["resize"]
        if len(resize) != 2 or any(not isinstance(r, int) or r < 1 for r in resize):
            raise ConfigError(f"resize must be two positive integers, got {resize!r}")
        cl = raw["classifiers"]
        if cl["cdl_ridge"] < 0 or (cl["src_lambda"] is not None and cl["src_lambda"] < 0):
            raise ConfigError("classifier regularization must be nonnegative")
        jobs = raw["jobs"]
        if jobs is not None and (not isinstance(jobs, int) or jobs < 1):
            raise ConfigError("jobs must be a positive integer or null")
        if raw["paths"]["dataset"] is None and protocol.train_sets_per_class >= synthetic.sets_per_class:
            raise ConfigError("protocol.train_sets_per_class must be below synthetic.sets_per_class")
        settings = EvalSettings(
            feature=feature,
            nystrom_kernel=kernel,
            src_kernel=src_kernel,
            D=ny["D"],
            M=ny["M"],
            nystrom_seed=int(ny["seed"]),
            refit_per_trial=bool(ny["refit_per_trial"]),
            eps=float(eps),
            resize=(resize[0], resize[1]),
            cdl_ridge=float(cl["cdl_ridge"]),
            src_lambda=cl["src_lambda"],
            jobs=jobs or os.cpu_count() or 1,
        )
        return cls(raw, feature, kernel, src_kernel, protocol, synthetic, settings)

    def check_paths(self, need=("dataset", "cache", "output")) -> None:
        """Fail early when the dataset is missing or a cache/output dir cannot be created."""
        paths = self.raw["paths"]
        if "dataset" in need and paths["dataset"] is not None and not Path(paths["dataset"]).is_dir():
            raise ConfigError(f"dataset root {paths['dataset']} is not a directory")
        for key in ("cache", "output"):
            if key not in need:
                continue
            p = Path(paths[key]).resolve()
            if p.exists():
                if not p.is_dir():
                    raise ConfigError(f"paths.{key} {p} exists and is not a directory")
                continue
            parent = next(q for q in p.parents if q.exists())
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise ConfigError(f"paths.{key} {p} cannot be created under {parent}")

    def hash(self) -> str:
        """Hash of every setting that can change a result (paths and jobs excluded)."""
        doc = {k: v for k, v in self.raw.items() if k not in ("paths", "jobs")}
        if self.raw["paths"]["dataset"] is not None:
            doc.pop("synthetic")
        return config_hash(doc)

    def descriptor_hash(self, kind: str) -> str:
        """Hash of the settings a cached per-set array of ``kind`` depends on."""
        doc = {"eps": self.raw["eps"], "source": self.source_id()}
        if kind == "image_covds":
            doc["feature"] = self.raw["feature"]
        else:
            doc["resize"] = self.raw["resize"]
        return config_hash(doc)

    def source_id(self) -> dict:
        ds = self.raw["paths"]["dataset"]
        if ds is None:
            return {"synthetic": self.raw["synthetic"]}
        return {"dataset": str(Path(ds).resolve())}

    @property
    def dataset_name(self) -> str:
        ds = self.raw["paths"]["dataset"]
        return "synthetic" if ds is None else Path(ds).resolve().name


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` strings; values are parsed as JSON, else kept as text."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return doc

