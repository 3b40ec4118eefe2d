"""
Dataset ingestion, M-per-class holdout splits, accuracy metrics and the
evaluation sweep over descriptors, colour spaces and training-set sizes.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .classify import train_multiclass
from .constants import IMAGE_EXTENSIONS
from .errors import (
    ConfigError,
    EmptyClassDirError,
    EmptyInputError,
    InsufficientExamplesError,
    LengthMismatchError,
    NoClassesError,
)
from .features import DescriptorId, FeatureSpec, extract_dataset, stack_features
from .helpers import derive_seed
from .image_io import RasterImage, load_image
from .runtime import StageTimer, parallel_map
from .segmentation import ClusterSelectionPolicy, KMeansConfig, segment_image


@dataclass(frozen=True)
class Dataset:
    items: Tuple[Tuple[str, str], ...]      # (image path, class label)
    classes: Tuple[str, ...]

    def __post_init__(self) -> None:
        unknown = {label for _, label in self.items} - set(self.classes)
        if unknown:
            raise NoClassesError(f"Items carry labels outside the class list: {sorted(unknown)}")

    @property
    def counts(self) -> Dict[str, int]:
        counter = Counter(label for _, label in self.items)
        return {name: counter.get(name, 0) for name in self.classes}

    @property
    def paths(self) -> List[str]:
        return [path for path, _ in self.items]

    @property
    def labels(self) -> List[str]:
        return [label for _, label in self.items]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int
    seed: int
    trial: int = 0


@dataclass(frozen=True)
class ReportRow:
    feature: str
    colorspace: str
    M: int
    trial: Optional[int]                    # None marks the mean over trials
    overall: float
    per_class: Tuple[Optional[float], ...]  # aligned with EvaluationReport.classes; None = absent

    @property
    def key(self) -> Tuple[str, str, int]:
        return self.feature, self.colorspace, self.M


@dataclass(frozen=True)
class EvaluationReport:
    classes: Tuple[str, ...]
    rows: Tuple[ReportRow, ...]             # one mean row per (feature, colorspace, M)
    trials: Tuple[ReportRow, ...] = ()      # every individual trial
    metadata: Dict[str, str] = field(default_factory=dict)

    def row(self, feature: str, colorspace: str, M: int) -> ReportRow:
        for r in self.rows:
            if r.key == (feature, colorspace, M):
                return r
        raise KeyError((feature, colorspace, M))


def _is_image(path: Path) -> bool:
    return path.is_file() and not path.name.startswith(".") and path.suffix.lower() in IMAGE_EXTENSIONS


def ingest(root: Union[str, Path]) -> Dataset:
    """
    Reads a directory with one subdirectory of images per class.

    Classes are the subdirectory names in lexicographic order; items are
    ordered by class, then by file name.
    """
    root = Path(root)
    if not root.is_dir():
        raise NoClassesError(f"Dataset directory not found: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir() and not d.name.startswith("."))
    if not class_dirs:
        raise NoClassesError(f"No class subdirectories in {root}")
    items: List[Tuple[str, str]] = []
    for class_dir in class_dirs:
        files = sorted((p for p in class_dir.iterdir() if _is_image(p)), key=lambda p: p.name)
        if not files:
            raise EmptyClassDirError(f"Class directory {class_dir} holds no images")
        items.extend((str(p), class_dir.name) for p in files)
    dataset = Dataset(items=tuple(items), classes=tuple(d.name for d in class_dirs))
    logging.info("Ingested %d images in %d classes from %s", len(dataset), len(dataset.classes), root)
    return dataset


def _split_indices(labels: Sequence[str], classes: Sequence[str], spec: SplitSpec) -> Tuple[List[int], List[int]]:
    train: List[int] = []
    test: List[int] = []
    for name in classes:
        members = [i for i, label in enumerate(labels) if label == name]
        if not 1 <= spec.train_per_class < len(members):
            raise InsufficientExamplesError(
                f"Class '{name}' has {len(members)} images; M={spec.train_per_class} needs at least M+1")
        rng = np.random.default_rng(derive_seed(spec.seed, "split", spec.train_per_class, spec.trial, name))
        shuffled = [members[k] for k in rng.permutation(len(members))]
        train.extend(shuffled[:spec.train_per_class])
        test.extend(shuffled[spec.train_per_class:])
    return sorted(train), sorted(test)


def split(ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle inside every class; the first M go to training, the rest to testing."""
    train, test = _split_indices(ds.labels, ds.classes, spec)
    return (Dataset(tuple(ds.items[i] for i in train), ds.classes),
            Dataset(tuple(ds.items[i] for i in test), ds.classes))


def _check_lengths(predictions: Sequence[str], truth: Sequence[str]) -> None:
    if len(predictions) != len(truth):
        raise LengthMismatchError(f"{len(predictions)} predictions for {len(truth)} ground-truth labels")
    if not truth:
        raise EmptyInputError("Accuracy of an empty test set is undefined")


def accuracy(predictions: Sequence[str], truth: Sequence[str]) -> float:
    """100 x correctly classified / tested."""
    _check_lengths(predictions, truth)
    correct = sum(1 for p, t in zip(predictions, truth) if p == t)
    return 100.0 * correct / len(truth)


def per_class_accuracy(predictions: Sequence[str], truth: Sequence[str]) -> Dict[str, float]:
    """Accuracy restricted to each true class; classes without test items are absent."""
    _check_lengths(predictions, truth)
    totals: Counter = Counter(truth)
    correct: Counter = Counter(t for p, t in zip(predictions, truth) if p == t)
    return {name: 100.0 * correct[name] / totals[name] for name in sorted(totals)}


# ---------------------------------------------------------------------------
# Evaluation sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSettings:
    """What run_experiment needs from the pipeline configuration."""
    seed: int
    kmeans: KMeansConfig
    policy: ClusterSelectionPolicy
    segment: bool = True
    C: float = 1.0
    decoding: str = "literal"


def image_seed(master: int, path: str, label: str) -> int:
    """K-means seed of one image, independent of where the dataset lives."""
    return derive_seed(master, "kmeans", label, Path(path).name)


def segment_masks(images: Sequence[RasterImage], ds: Dataset, settings: SweepSettings,
                  threads: int = 1) -> List[Optional[np.ndarray]]:
    """Defect mask of every image, or None for every image when segmentation is off."""
    if not settings.segment:
        return [None] * len(images)

    def run(index: int) -> np.ndarray:
        path, label = ds.items[index]
        cfg = replace(settings.kmeans, seed=image_seed(settings.seed, path, label))
        return segment_image(images[index], cfg, settings.policy).defect_mask

    return parallel_map(run, range(len(images)), threads)


def _mean_row(rows: Sequence[ReportRow]) -> ReportRow:
    first = rows[0]
    per_class = []
    for c in range(len(first.per_class)):
        values = [r.per_class[c] for r in rows if r.per_class[c] is not None]
        per_class.append(float(np.mean(values)) if values else None)
    return ReportRow(first.feature, first.colorspace, first.M, None,
                     float(np.mean([r.overall for r in rows])), tuple(per_class))


def run_experiment(ds: Dataset, features: Sequence[DescriptorId], colorspaces: Sequence[str],
                   m_values: Sequence[int], trials: int, settings: SweepSettings,
                   threads: int = 1, metadata: Optional[Dict[str, str]] = None) -> EvaluationReport:
    """
    Full sweep: segment, extract, then train and test every (feature, colour space, M, trial) cell.

    Images are decoded and segmented once; features are extracted once per
    (descriptor, colour space) and reused by every M and trial. Every seed
    derives from settings.seed, so the report does not depend on threads.
    """
    if trials < 1:
        raise ConfigError(f"trials must be at least 1, got {trials}")
    if not features or not colorspaces or not m_values:
        raise EmptyInputError("The sweep needs at least one feature, colour space and M")
    for M in m_values:
        _split_indices(ds.labels, ds.classes, SplitSpec(M, settings.seed))

    timer = StageTimer()
    images = parallel_map(load_image, ds.paths, threads)
    timer.checkpoint("load")
    masks = segment_masks(images, ds, settings, threads)
    timer.checkpoint("segment")

    labels = ds.labels
    trial_rows: List[ReportRow] = []
    capped_cells = 0
    for descriptor in features:
        for colorspace in colorspaces:
            spec = FeatureSpec(descriptor, colorspace)
            X = stack_features(extract_dataset(images, spec, masks, threads))
            timer.checkpoint(f"extract {spec.token()}")
            cells = [(M, trial) for M in m_values for trial in range(trials)]

            def run_cell(cell: Tuple[int, int]) -> Tuple[ReportRow, int]:
                M, trial = cell
                train, test = _split_indices(labels, ds.classes, SplitSpec(M, settings.seed, trial))
                model = train_multiclass(X[train], [labels[i] for i in train], settings.C,
                                         derive_seed(settings.seed, "svm", M, trial),
                                         class_names=ds.classes, feature_spec=spec)
                predicted_ids, _, _ = model.predict_batch(X[test], settings.decoding)
                predicted = [ds.classes[i] for i in predicted_ids]
                truth = [labels[i] for i in test]
                by_class = per_class_accuracy(predicted, truth)
                row = ReportRow(descriptor.kind.value, colorspace, M, trial, accuracy(predicted, truth),
                                tuple(by_class.get(name) for name in ds.classes))
                return row, model.capped_learners

            for row, capped in parallel_map(run_cell, cells, threads):
                trial_rows.append(row)
                if capped:
                    capped_cells += 1
            timer.checkpoint(f"classify {spec.token()}")

    trial_rows.sort(key=lambda r: (r.feature, r.colorspace, r.M, r.trial))
    mean_rows = []
    for key in sorted({r.key for r in trial_rows}):
        mean_rows.append(_mean_row([r for r in trial_rows if r.key == key]))
    if capped_cells:
        logging.warning("%d of %d cells trained learners that stopped at the epoch cap",
                        capped_cells, len(trial_rows))
    timer.log_summary()

    meta = {"seed": str(settings.seed), "trials": str(trials), "decoding": settings.decoding}
    meta.update(metadata or {})
    return EvaluationReport(classes=ds.classes, rows=tuple(mean_rows), trials=tuple(trial_rows), metadata=meta)


def summarize(report: EvaluationReport) -> List[str]:
    """Readable comparisons drawn from the mean rows; informational only."""
    lines: List[str] = []
    if not report.rows:
        return lines
    m_values = sorted({r.M for r in report.rows})
    m_max, m_min = m_values[-1], m_values[0]
    colorspaces = sorted({r.colorspace for r in report.rows})
    features = sorted({r.feature for r in report.rows})

    for cs in colorspaces:
        ranked = sorted((r for r in report.rows if r.colorspace == cs and r.M == m_max),
                        key=lambda r: (-r.overall, r.feature))
        lines.append(f"[{cs}, M={m_max}] ranking: " + ", ".join(f"{r.feature} {r.overall:.2f}%" for r in ranked))

    if len(colorspaces) > 1:
        for feature in features:
            parts = [f"{cs} {report.row(feature, cs, m_max).overall:.2f}%" for cs in colorspaces
                     if any(r.key == (feature, cs, m_max) for r in report.rows)]
            lines.append(f"[{feature}, M={m_max}] colour spaces: " + " vs ".join(parts))

    if m_min != m_max:
        for feature in features:
            for cs in colorspaces:
                try:
                    low, high = report.row(feature, cs, m_min), report.row(feature, cs, m_max)
                except KeyError:
                    continue
                lines.append(f"[{feature}/{cs}] M={m_min} -> M={m_max}: {low.overall:.2f}% -> {high.overall:.2f}% "
                             f"({high.overall - low.overall:+.2f})")

    for r in (r for r in report.rows if r.M == m_max):
        scored = [(acc, name) for acc, name in zip(r.per_class, report.classes) if acc is not None]
        if scored:
            acc, name = min(scored)
            lines.append(f"[{r.feature}/{r.colorspace}, M={m_max}] weakest class: {name} {acc:.2f}%")
    return lines
