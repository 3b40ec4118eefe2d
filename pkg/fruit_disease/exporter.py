"""
CSV formats: per-image feature rows and the evaluation report.
"""

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FeatureFormatError, ReportFormatError
from .evaluation import EvaluationReport, ReportRow
from .features import FeatureSpec, FeatureVector, stack_features
from .helpers import ensure_parent, format_float

PathLike = Union[str, Path]
REPORT_KEY_COLUMNS = ["feature", "colorspace", "M", "trial", "overall_acc"]
MEAN_TRIAL = "mean"


@dataclass(frozen=True, eq=False)
class FeatureRecord:
    path: str
    label: str
    spec: FeatureSpec
    vector: FeatureVector

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureRecord):
            return NotImplemented
        return (self.path, self.label, self.spec, self.vector) == (other.path, other.label, other.spec, other.vector)


def records_matrix(records: Sequence[FeatureRecord]) -> Tuple[np.ndarray, List[str], FeatureSpec]:
    """Feature matrix, labels and the single feature spec shared by all records."""
    if not records:
        raise FeatureFormatError("No feature rows")
    specs = {r.spec for r in records}
    if len(specs) != 1:
        raise FeatureFormatError(f"Feature rows mix descriptors: {sorted(s.token() for s in specs)}")
    return stack_features([r.vector for r in records]), [r.label for r in records], records[0].spec


def write_feature_csv(path: PathLike, records: Sequence[FeatureRecord]) -> None:
    """
    Writes one row per image: path, label, descriptor_id, v0, v1, ...

    Values use shortest round-trip decimal text, so read_feature_csv gives back
    bit-identical vectors.
    """
    width = max((r.vector.length for r in records), default=0)
    path = ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["path", "label", "descriptor_id"] + [f"v{i}" for i in range(width)])
        for r in records:
            writer.writerow([r.path, r.label, r.spec.token()] + [format_float(v) for v in r.vector.values])
    logging.info("Wrote %d feature rows to %s", len(records), path)


def read_feature_csv(path: PathLike) -> List[FeatureRecord]:
    path = Path(path)
    if not path.is_file():
        raise FeatureFormatError(f"Feature CSV not found: {path}")
    records: List[FeatureRecord] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[:3] != ["path", "label", "descriptor_id"]:
            raise FeatureFormatError(f"{path} is not a feature CSV (bad header)")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                spec = FeatureSpec.parse(row[2])
                values = np.array([float(v) for v in row[3:] if v != ""])
            except (IndexError, ValueError) as e:
                raise FeatureFormatError(f"{path}:{line_no}: {e}") from e
            blocks = spec.descriptor.block_sizes()
            if values.shape[0] != sum(blocks):
                raise FeatureFormatError(
                    f"{path}:{line_no}: {values.shape[0]} values, {spec.token()} needs {sum(blocks)}")
            records.append(FeatureRecord(row[0], row[1], spec, FeatureVector(spec.descriptor, values, blocks)))
    return records


def _format_accuracy(value: Optional[float]) -> str:
    return "" if value is None else format_float(value)


def _parse_accuracy(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def report_to_csv(report: EvaluationReport) -> str:
    """
    Report text: '#key=value' metadata lines, a header, then per (feature,
    colorspace, M) its trial rows followed by one 'mean' row.
    """
    buffer = io.StringIO()
    for key, value in report.metadata.items():
        if "\n" in key or "=" in key or "\n" in str(value):
            raise ReportFormatError(f"Metadata entry {key!r} cannot be written")
        buffer.write(f"#{key}={value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_KEY_COLUMNS + [f"acc_{name}" for name in report.classes])

    trials_by_key: Dict[Tuple[str, str, int], List[ReportRow]] = {}
    for r in report.trials:
        trials_by_key.setdefault(r.key, []).append(r)
    for mean in sorted(report.rows, key=lambda r: r.key):
        for r in sorted(trials_by_key.get(mean.key, []), key=lambda r: r.trial):
            writer.writerow([r.feature, r.colorspace, r.M, r.trial, format_float(r.overall)]
                            + [_format_accuracy(v) for v in r.per_class])
        writer.writerow([mean.feature, mean.colorspace, mean.M, MEAN_TRIAL, format_float(mean.overall)]
                        + [_format_accuracy(v) for v in mean.per_class])
    return buffer.getvalue()


def write_report_csv(path: PathLike, report: EvaluationReport) -> None:
    path = ensure_parent(path)
    path.write_text(report_to_csv(report), encoding="utf-8")
    logging.info("Wrote report with %d rows to %s", len(report.rows), path)


def read_report_csv(path: PathLike) -> EvaluationReport:
    path = Path(path)
    if not path.is_file():
        raise ReportFormatError(f"Report not found: {path}")
    metadata: Dict[str, str] = {}
    body: List[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise ReportFormatError(f"{path}: malformed metadata line {line!r}")
            metadata[key] = value
        elif line:
            body.append(line)

    rows = list(csv.reader(body))
    if not rows or rows[0][:len(REPORT_KEY_COLUMNS)] != REPORT_KEY_COLUMNS:
        raise ReportFormatError(f"{path} is not an evaluation report (bad header)")
    class_columns = rows[0][len(REPORT_KEY_COLUMNS):]
    if any(not c.startswith("acc_") for c in class_columns):
        raise ReportFormatError(f"{path}: unexpected columns {class_columns}")
    classes = tuple(c[len("acc_"):] for c in class_columns)

    means: List[ReportRow] = []
    trials: List[ReportRow] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise ReportFormatError(f"{path}: row {line_no} has {len(row)} cells, expected {len(rows[0])}")
        try:
            trial = None if row[3] == MEAN_TRIAL else int(row[3])
            parsed = ReportRow(row[0], row[1], int(row[2]), trial, float(row[4]),
                               tuple(_parse_accuracy(v) for v in row[len(REPORT_KEY_COLUMNS):]))
        except ValueError as e:
            raise ReportFormatError(f"{path}: row {line_no}: {e}") from e
        (means if trial is None else trials).append(parsed)
    return EvaluationReport(classes=classes, rows=tuple(means), trials=tuple(trials), metadata=metadata)
