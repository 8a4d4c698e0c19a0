"""Command-line front end: ``aidcov {init,synth,extract,eval,selftest}``.

Exit codes: 0 success, 1 computation failure, 2 configuration or I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import Config, ConfigError, apply_overrides, default_config, load_config
from .evaluation import (
    METHODS,
    DatasetError,
    EvalError,
    emit_report,
    format_table,
    load_dataset,
    run_protocol,
    save_dataset,
    synth_dataset,
)
from .features import FeatureError, traditional_set_covd
from .imageio import ImageReadError
from .pipeline import DescriptorCache, image_covds
from .selftest import run_selftest
from .spd import SpdError

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2


def _build_config(args) -> Config:
    doc = load_config(args.config) if args.config else {}
    overrides = list(args.set or [])
    if getattr(args, "jobs", None) is not None:
        overrides.append(f"jobs={args.jobs}")
    if getattr(args, "methods", None):
        names = [m for chunk in args.methods for m in chunk.split(",") if m]
        overrides.append("protocol.methods=" + json.dumps(names))
    if getattr(args, "trials", None) is not None:
        overrides.append(f"protocol.trials={args.trials}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"protocol.seed={args.seed}")
    if getattr(args, "dataset", None) is not None:
        overrides.append("paths.dataset=" + json.dumps(args.dataset))
    try:
        return Config.from_dict(apply_overrides(doc, overrides))
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _load_data(cfg: Config):
    ds = cfg.raw["paths"]["dataset"]
    if ds is None:
        return synth_dataset(cfg.synthetic)
    return load_dataset(ds)


def extract(cfg: Config, data=None, want_images=True, want_traditional=True, echo=print):
    """Per-image CovDs and traditional set CovDs for every set, through the cache."""
    data = _load_data(cfg) if data is None else data
    s = cfg.settings
    cache = DescriptorCache(cfg.raw["paths"]["cache"])
    name = cfg.dataset_name
    h_img = cfg.descriptor_hash("image_covds")
    h_trad = cfg.descriptor_hash("traditional")
    covds, trads = None, None
    if want_images:
        covds = [
            list(
                cache.get_or_compute(
                    name, st.name, "image_covds", h_img,
                    lambda st=st: np.stack(image_covds(st, s.feature, s.eps, s.jobs)),
                    {"images": len(st), "feature": cfg.raw["feature"], "eps": s.eps},
                )
            )
            for st in data
        ]
    if want_traditional:
        trads = [
            cache.get_or_compute(
                name, st.name, "traditional", h_trad,
                lambda st=st: traditional_set_covd(st, s.resize, s.eps),
                {"images": len(st), "resize": list(s.resize), "eps": s.eps},
            )
            for st in data
        ]
    echo(f"extract: {len(data)} sets, cache hits {cache.hits}, computed {cache.misses}")
    return data, covds, trads, cache


def cmd_init(args) -> int:
    path = Path(args.config or "aidcov.json")
    if path.exists() and not args.force:
        print(f"{path} exists; use --force to overwrite", file=sys.stderr)
        return EXIT_CONFIG
    path.write_text(json.dumps(default_config(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _build_config(args)
    out = Path(args.out or cfg.raw["paths"]["dataset"] or "synthetic-data")
    save_dataset(synth_dataset(cfg.synthetic), out)
    print(f"wrote {cfg.synthetic.classes * cfg.synthetic.sets_per_class} image sets to {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = _build_config(args)
    cfg.check_paths(("dataset", "cache"))
    extract(cfg)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _build_config(args)
    cfg.check_paths()
    methods = cfg.protocol.methods
    data, covds, trads, _ = extract(
        cfg,
        want_images=any(m.endswith("_pro") for m in methods),
        want_traditional=any(not m.endswith("_pro") for m in methods),
    )
    report = run_protocol(
        data,
        cfg.protocol,
        cfg.settings,
        dataset_name=cfg.dataset_name,
        config_hash=cfg.hash(),
        per_image_covds=covds,
        traditional=trads,
        progress=None if args.quiet else print,
    )
    out = Path(cfg.raw["paths"]["output"])
    out.mkdir(parents=True, exist_ok=True)
    emit_report(report, out / "report.json", "JSON")
    emit_report(report, out / "report.csv", "CSV")
    emit_report(report, out / "report.txt", "TEXT_TABLE")
    print(format_table([report]), end="")
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    _build_config(args)
    return EXIT_OK if run_selftest(args.seed or 0) else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="aidcov",
        description="Approximate infinite-dimensional covariance descriptors for image sets.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", "-c", help="JSON config file (defaults when omitted)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. nystrom.D=80")
        sp.add_argument("--jobs", type=int, help=f"worker threads (default {os.cpu_count()})")
        return sp

    sp = common(sub.add_parser("init", help="write a config file with all defaults"))
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_init)

    sp = common(sub.add_parser("synth", help="write the synthetic dataset to disk"))
    sp.add_argument("--out", help="output directory (default paths.dataset)")
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("extract", help="compute and cache per-image and traditional CovDs"))
    sp.add_argument("--dataset", help="dataset root (overrides paths.dataset)")
    sp.set_defaults(func=cmd_extract)

    sp = common(sub.add_parser("eval", help="run the split protocol and write reports"))
    sp.add_argument("--dataset", help="dataset root (overrides paths.dataset)")
    sp.add_argument("--methods", action="append", help="comma-separated subset of " + ",".join(METHODS))
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--quiet", "-q", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("selftest", help="run the built-in invariant checks"))
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ImageReadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EvalError, SpdError, FeatureError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
