"""Datasets, the repeated random-split protocol and accuracy reports."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classifiers import cdl_fit, cdl_predict, nn_classify, src_fit, src_predict
from .features import MIN_IMAGE_SIDE, FeatureSpec, ImageSet, traditional_set_covd
from .imageio import IMAGE_SUFFIXES, read_image
from .metrics import KernelSpec, KernelKind, log_stack
from .nystrom import fit_from_logs
from .pipeline import aid_covd_from_logs, image_covds

__all__ = [
    "METHODS",
    "Protocol",
    "EvalSettings",
    "MethodResult",
    "EvalReport",
    "SyntheticSpec",
    "EvalError",
    "LeakageError",
    "DatasetError",
    "load_dataset",
    "synth_dataset",
    "save_dataset",
    "make_rng",
    "split_sets",
    "run_protocol",
    "emit_report",
    "format_table",
    "report_from_json",
    "REPORT_SCHEMA",
]

METHODS = (
    "NN-AIRM",
    "NN-AIRM_pro",
    "NN-LogED",
    "NN-LogED_pro",
    "CDL",
    "CDL_pro",
    "LogEKSR",
    "LogEKSR_pro",
)
REPORT_SCHEMA = "aidcov-report/1"
RNG_ALGORITHMS = ("philox",)


class DatasetError(ValueError):
    pass


class EvalError(RuntimeError):
    pass


class LeakageError(AssertionError):
    pass


# ----------------------------------------------------------------------------
# datasets


def load_dataset(root) -> list[ImageSet]:
    """Read ``root/<class>/<set>/<image>`` in lexicographic order."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    classes = sorted(p for p in root.iterdir() if p.is_dir())
    if not classes:
        raise DatasetError(f"dataset root {root} has no class directories")
    sets = []
    for cdir in classes:
        set_dirs = sorted(p for p in cdir.iterdir() if p.is_dir())
        if not set_dirs:
            raise DatasetError(f"class directory {cdir} has no image sets")
        for sdir in set_dirs:
            files = sorted(
                p for p in sdir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
            )
            if not files:
                raise DatasetError(f"image set {sdir} has no images")
            images = [read_image(f) for f in files]
            shapes = {im.shape for im in images}
            if len(shapes) > 1:
                raise DatasetError(f"image set {sdir} mixes image sizes {sorted(shapes)}")
            sets.append(ImageSet(cdir.name, images, f"{cdir.name}/{sdir.name}"))
    return sets


@dataclass(frozen=True)
class SyntheticSpec:
    """Oriented sinusoidal textures, one orientation/frequency per class.

    ``texture_frequency_separation`` is the spacing in cycles per pixel
    between class base frequencies; class orientations are spread over
    ``[0, pi)``. Each set draws a phase and a viewpoint offset (orientation,
    frequency, contrast) scaled by ``set_jitter``. Each image then varies
    around its set like a change of view: at ``image_jitter=1`` the
    orientation has standard deviation 0.6 rad, the frequency 30% and the
    phase 1.5 pi. ``noise_level`` is the standard deviation of additive
    Gaussian pixel noise; the texture amplitude is about 0.25.
    """

    classes: int = 4
    sets_per_class: int = 10
    images_per_set: int = 15
    image_size: int = 32
    texture_frequency_separation: float = 0.03
    noise_level: float = 0.2
    seed: int = 0
    base_frequency: float = 0.1
    set_jitter: float = 0.35
    image_jitter: float = 1.0

    def __post_init__(self):
        if min(self.classes, self.sets_per_class, self.images_per_set) < 1:
            raise ValueError("classes, sets_per_class and images_per_set must be positive")
        if self.image_size < MIN_IMAGE_SIDE:
            raise ValueError(f"image_size must be >= {MIN_IMAGE_SIDE}")
        if self.texture_frequency_separation <= 0 or self.base_frequency <= 0:
            raise ValueError("frequencies must be positive")
        if self.noise_level < 0 or self.set_jitter < 0 or self.image_jitter < 0:
            raise ValueError("noise and jitter levels must be nonnegative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator (Philox) for ``seed`` and a spawn key."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def synth_dataset(spec: SyntheticSpec) -> list[ImageSet]:
    n = spec.image_size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    sets = []
    for c in range(spec.classes):
        theta_c = math.pi * c / spec.classes
        freq_c = spec.base_frequency + spec.texture_frequency_separation * c
        for s in range(spec.sets_per_class):
            rng = make_rng(spec.seed, c, s)
            # per-set "viewpoint": phase, orientation, scale and contrast offsets
            phase_s = rng.uniform(0, 2 * math.pi)
            d_theta = spec.set_jitter * (math.pi / (2 * spec.classes)) * rng.uniform(-1, 1)
            d_freq = 1.0 + 0.5 * spec.set_jitter * rng.uniform(-1, 1)
            contrast = 0.25 * (1.0 + 0.5 * spec.set_jitter * rng.uniform(-1, 1))
            images = []
            for _ in range(spec.images_per_set):
                j = spec.image_jitter * rng.normal(size=3)
                theta = theta_c + d_theta + 0.6 * j[0]
                freq = freq_c * d_freq * (1.0 + 0.3 * j[1])
                phase = phase_s + 1.5 * math.pi * j[2]
                u = xx * math.cos(theta) + yy * math.sin(theta)
                img = 0.5 + contrast * np.sin(2 * math.pi * freq * u + phase)
                img = img + spec.noise_level * rng.normal(size=img.shape)
                images.append(np.clip(img, 0.0, 1.0))
            sets.append(ImageSet(f"class{c:02d}", images, f"class{c:02d}/set{s:02d}"))
    return sets


def save_dataset(sets: Sequence[ImageSet], root) -> None:
    """Write sets as ``root/<class>/<set>/<index>.pgm``."""
    from .imageio import write_pgm

    root = Path(root)
    for st in sets:
        set_name = st.name.split("/")[-1] if st.name else "set"
        d = root / st.label / set_name
        d.mkdir(parents=True, exist_ok=True)
        for i, im in enumerate(st.images):
            write_pgm(d / f"{i:04d}.pgm", im)


# ----------------------------------------------------------------------------
# protocol


@dataclass(frozen=True)
class Protocol:
    trials: int = 10
    train_sets_per_class: int = 2
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    std: str = "population"
    rng: str = "philox"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 1 or self.train_sets_per_class < 1:
            raise ValueError("trials and train_sets_per_class must be positive")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ValueError(f"unknown or empty method list {unknown}; choose from {METHODS}")
        if self.std not in ("population", "sample"):
            raise ValueError("std must be 'population' or 'sample'")
        if self.rng not in RNG_ALGORITHMS:
            raise ValueError(f"rng must be one of {RNG_ALGORITHMS}")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["methods"] = list(self.methods)
        return d


@dataclass
class MethodResult:
    mean: float
    std: float
    accuracies: list[float]
    seconds: float = field(default=0.0, compare=False)


@dataclass
class EvalReport:
    """Per-method accuracy (percent) over trials.

    Wall-clock seconds are kept in memory and in the text table but left out
    of the JSON form, so identical runs produce identical JSON files.
    """

    dataset: str
    methods: dict[str, MethodResult]
    config_hash: str
    seed: int
    std: str = "population"
    test_counts: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "schema": REPORT_SCHEMA,
            "dataset": self.dataset,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "std": self.std,
            "test_counts": self.test_counts,
            "methods": {
                name: {"mean": r.mean, "std": r.std, "accuracies": r.accuracies}
                for name, r in self.methods.items()
            },
        }
        return json.dumps(doc, indent=2) + "\n"


def report_from_json(text: str) -> EvalReport:
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    methods = {
        name: MethodResult(r["mean"], r["std"], list(r["accuracies"]))
        for name, r in doc["methods"].items()
    }
    return EvalReport(
        doc["dataset"], methods, doc["config_hash"], doc["seed"], doc["std"], doc["test_counts"]
    )


def split_sets(labels: Sequence[str], train_per_class: int, rng: np.random.Generator):
    """Per-class random split; returns sorted (train, test) index arrays."""
    labels = list(labels)
    train, test = [], []
    for c in sorted(set(labels)):
        idx = np.array([i for i, l in enumerate(labels) if l == c])
        if train_per_class >= len(idx):
            raise DatasetError(
                f"class {c!r} has {len(idx)} sets; cannot hold out with {train_per_class} for training"
            )
        perm = rng.permutation(len(idx))
        train.extend(idx[perm[:train_per_class]])
        test.extend(idx[perm[train_per_class:]])
    return np.array(sorted(train)), np.array(sorted(test))


def _aggregate(acc: list[float], std: str) -> tuple[float, float]:
    a = np.asarray(acc, dtype=np.float64)
    ddof = 1 if std == "sample" and len(a) > 1 else 0
    return float(a.mean()), float(a.std(ddof=ddof))


def _guard(fit_sets, test_sets, what: str) -> None:
    leaked = set(int(i) for i in fit_sets) & set(int(i) for i in test_sets)
    if leaked:
        raise LeakageError(f"{what} touched test sets {sorted(leaked)}")


@dataclass(frozen=True)
class EvalSettings:
    """Numerical settings used by :func:`run_protocol`."""

    feature: FeatureSpec = FeatureSpec()
    nystrom_kernel: KernelSpec = KernelSpec(KernelKind.LOGE_LINEAR)
    src_kernel: KernelSpec = KernelSpec(KernelKind.LOGE_POLY)
    D: int = 40
    M: int = 60
    nystrom_seed: int = 0
    refit_per_trial: bool = True
    eps: float = 1e-3
    resize: tuple[int, int] = (20, 20)
    cdl_ridge: float = 1e-3
    src_lambda: float | None = None
    jobs: int = 1


def _classify(method: str, train, ytrain, test, s: EvalSettings) -> list:
    base = method.removesuffix("_pro")
    if base == "NN-AIRM":
        return nn_classify(train, ytrain, test, "AIRM")
    if base == "NN-LogED":
        return nn_classify(train, ytrain, test, "LOGED")
    if base == "CDL":
        return cdl_predict(cdl_fit(train, ytrain, s.cdl_ridge), test)
    if base == "LogEKSR":
        return src_predict(src_fit(train, ytrain, s.src_kernel, s.src_lambda), test)
    raise ValueError(method)


def run_protocol(
    data: Sequence[ImageSet],
    protocol: Protocol,
    settings: EvalSettings | None = None,
    *,
    dataset_name: str = "dataset",
    config_hash: str = "",
    per_image_covds: Sequence[Sequence[np.ndarray]] | None = None,
    traditional: Sequence[np.ndarray] | None = None,
    audit: list | None = None,
    progress: Callable[[str], None] | None = None,
) -> EvalReport:
    """Evaluate the requested methods over ``protocol.trials`` random splits.

    Per-image CovDs and traditional descriptors can be supplied precomputed
    (e.g. from a cache); otherwise they are computed here. Every fit is
    checked against the trial's test sets; ``audit`` receives one record per
    fit listing the set indices it used.
    """
    s = settings or EvalSettings()
    labels = [st.label for st in data]
    methods = protocol.methods
    want_pro = any(m.endswith("_pro") for m in methods)
    want_trad = any(not m.endswith("_pro") for m in methods)

    if want_trad and traditional is None:
        traditional = [traditional_set_covd(st, s.resize, s.eps) for st in data]
    img_logs = None
    if want_pro:
        if per_image_covds is None:
            per_image_covds = [image_covds(st, s.feature, s.eps, s.jobs) for st in data]
        img_logs = [log_stack(c) for c in per_image_covds]
        owner = np.concatenate([np.full(len(l), i) for i, l in enumerate(img_logs)])
        all_logs = np.concatenate(img_logs)

    acc = {m: [] for m in methods}
    secs = {m: 0.0 for m in methods}
    test_counts = []
    global_model = None
    for t in range(protocol.trials):
        split_rng = make_rng(protocol.seed, t, 0)
        train_idx, test_idx = split_sets(labels, protocol.train_sets_per_class, split_rng)
        test_counts.append(int(len(test_idx)))
        ytrain = [labels[i] for i in train_idx]
        ytest = [labels[i] for i in test_idx]
        aid = None
        if want_pro:
            if s.refit_per_trial or global_model is None:
                pool_sets = train_idx if s.refit_per_trial else np.arange(len(data))
                pool = np.flatnonzero(np.isin(owner, pool_sets))
                m_eff = min(s.M, len(pool))
                lm_rng = make_rng(protocol.seed, t if s.refit_per_trial else 0, 1, s.nystrom_seed)
                picked = np.sort(lm_rng.choice(pool, size=m_eff, replace=False))
                if s.refit_per_trial:
                    _guard(np.unique(owner[picked]), test_idx, "Nyström landmark pool")
                if audit is not None:
                    audit.append(("nystrom", t, sorted(set(owner[picked].tolist()))))
                try:
                    model = fit_from_logs(all_logs[picked], s.nystrom_kernel, min(s.D, m_eff))
                except Exception as exc:
                    raise EvalError(f"Nyström fit failed in trial {t} (seed {protocol.seed}): {exc}") from exc
                if not s.refit_per_trial:
                    global_model = model
            else:
                model = global_model
            aid = [aid_covd_from_logs(model, l, s.eps) for l in img_logs]
        for m in methods:
            desc = aid if m.endswith("_pro") else traditional
            _guard(train_idx, test_idx, f"{m} classifier fit")
            if audit is not None:
                audit.append((m, t, train_idx.tolist()))
            t0 = time.perf_counter()
            try:
                pred = _classify(m, [desc[i] for i in train_idx], ytrain, [desc[i] for i in test_idx], s)
            except Exception as exc:
                raise EvalError(
                    f"method {m} failed in trial {t} (split seed {protocol.seed}, key {t}): {exc}"
                ) from exc
            secs[m] += time.perf_counter() - t0
            acc[m].append(100.0 * float(np.mean([p == y for p, y in zip(pred, ytest)])))
        if progress is not None:
            progress(f"trial {t + 1}/{protocol.trials}: " + ", ".join(f"{m}={acc[m][-1]:.1f}" for m in methods))

    results = {}
    for m in methods:
        mean, std = _aggregate(acc[m], protocol.std)
        results[m] = MethodResult(mean, std, acc[m], secs[m])
    return EvalReport(dataset_name, results, config_hash, protocol.seed, protocol.std, test_counts)


# ----------------------------------------------------------------------------
# reports


def format_table(reports: Sequence[EvalReport], with_time: bool = False) -> str:
    """Aligned text table, one row per method and one ``mean ± std`` column per dataset."""
    methods = [m for m in METHODS if any(m in r.methods for r in reports)]
    methods += [m for r in reports for m in r.methods if m not in methods]
    header = ["Method"] + [r.dataset for r in reports]
    if with_time:
        header += [f"{r.dataset} time (s)" for r in reports]
    rows = []
    for m in methods:
        row = [m]
        for r in reports:
            res = r.methods.get(m)
            row.append(f"{res.mean:.2f} ± {res.std:.2f}" if res else "-")
        if with_time:
            for r in reports:
                res = r.methods.get(m)
                row.append(f"{res.seconds:.2f}" if res else "-")
        rows.append(row)
    widths = [max(len(x[i]) for x in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + rows]
    return "\n".join(lines) + "\n"


def _csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "mean", "std", "accuracies"])
    for m, r in report.methods.items():
        w.writerow([m, f"{r.mean:.6f}", f"{r.std:.6f}", ";".join(f"{a:.6f}" for a in r.accuracies)])
    return buf.getvalue()


def emit_report(report: EvalReport, path, fmt: str = "JSON") -> Path:
    """Write a report as JSON, CSV or TEXT_TABLE; returns the path written."""
    fmt = fmt.upper()
    if fmt == "JSON":
        text = report.to_json()
    elif fmt == "CSV":
        text = _csv(report)
    elif fmt == "TEXT_TABLE":
        text = format_table([report], with_time=True)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    return path
