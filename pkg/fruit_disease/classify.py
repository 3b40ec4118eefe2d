"""
One-vs-one multi-class linear SVM with ID-table minimum-distance decoding.

N classes give N(N-1)/2 binary learners, one per unordered class pair (i, j)
with i < j, trained only on the examples of those two classes. Class i is the
positive side. Every learner's sign outcome forms a vector that is compared
with each class row of the ID table (+1 / -1 / 0 entries); the nearest row
wins.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import DEFAULT_C, MODEL_FORMAT_NAME, MODEL_FORMAT_VERSION, SVM_MAX_EPOCHS, SVM_TOLERANCE
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyClassError,
    FeatureFormatError,
    LengthMismatchError,
    MissingClassError,
    ModelFormatError,
)
from .features import FeatureSpec, FeatureVector
from .helpers import derive_seed, ensure_parent, format_float
from .runtime import parallel_map

DECODINGS = ("literal", "ignore_zeros")


@dataclass(frozen=True, eq=False)
class BinarySvm:
    class_pos: int
    class_neg: int
    weights: np.ndarray
    bias: float
    C: float
    seed: int
    epochs: int = 0
    converged: bool = True

    def __post_init__(self) -> None:
        if self.class_pos == self.class_neg:
            raise ConfigError(f"A binary learner needs two different classes, got {self.class_pos} twice")
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def length(self) -> int:
        return self.weights.shape[0]

    def decision(self, x: np.ndarray) -> Union[float, np.ndarray]:
        """weights . x + bias for one vector or each row of a matrix."""
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def outcome(self, x: np.ndarray) -> Union[int, np.ndarray]:
        """+1 when the decision value is >= 0, else -1."""
        d = self.decision(x)
        return np.where(d >= 0, 1, -1) if np.ndim(d) else (1 if d >= 0 else -1)


@dataclass(frozen=True, eq=False)
class IdTable:
    n_classes: int
    columns: Tuple[Tuple[int, int], ...]
    entries: np.ndarray                     # (n_classes, n_columns) of +1 / -1 / 0

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def row(self, class_id: int) -> np.ndarray:
        return self.entries[class_id]


@dataclass(frozen=True, eq=False)
class Prediction:
    class_id: int
    outcomes: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True, eq=False)
class MsvmModel:
    id_table: IdTable
    learners: Tuple[BinarySvm, ...]
    class_names: Tuple[str, ...]
    feature_spec: Optional[FeatureSpec] = None
    C: float = DEFAULT_C
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.learners) != self.id_table.n_columns:
            raise ModelFormatError(f"{len(self.learners)} learners for {self.id_table.n_columns} ID-table columns")
        for learner, pair in zip(self.learners, self.id_table.columns):
            if (learner.class_pos, learner.class_neg) != pair:
                raise ModelFormatError(f"Learner for {(learner.class_pos, learner.class_neg)} sits in column {pair}")
        if len({learner.length for learner in self.learners}) > 1:
            raise ModelFormatError("Learners disagree on the feature length")
        if len(self.class_names) != self.id_table.n_classes:
            raise ModelFormatError(f"{len(self.class_names)} class names for {self.id_table.n_classes} classes")

    @property
    def n_classes(self) -> int:
        return self.id_table.n_classes

    @property
    def feature_length(self) -> int:
        return self.learners[0].length

    @property
    def capped_learners(self) -> int:
        """Learners that stopped at the epoch cap instead of the tolerance."""
        return sum(1 for learner in self.learners if not learner.converged)

    def predict_batch(self, X: np.ndarray, decoding: str = "literal") -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Class ids, (n, columns) outcomes and (n, classes) distances for every row of X."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_length:
            raise DimensionMismatchError(f"Expected (n, {self.feature_length}) features, got {X.shape}")
        W = np.stack([learner.weights for learner in self.learners], axis=1)
        b = np.array([learner.bias for learner in self.learners])
        outcomes = np.where(X @ W + b >= 0, 1, -1).astype(np.int8)
        distances = _distances(outcomes, self.id_table, decoding)
        return distances.argmin(axis=1), outcomes, distances


def build_id_table(n_classes: int) -> IdTable:
    """
    ID table for one-vs-one learners.

    Columns are the class pairs (i, j), i < j, in lexicographic order. In the
    column for (i, j), row i holds +1, row j holds -1 and every other row 0.
    """
    if n_classes < 2:
        raise ConfigError(f"An ID table needs at least 2 classes, got {n_classes}")
    columns = tuple(combinations(range(n_classes), 2))
    entries = np.zeros((n_classes, len(columns)), dtype=np.int8)
    for c, (i, j) in enumerate(columns):
        entries[i, c] = 1
        entries[j, c] = -1
    entries.setflags(write=False)
    return IdTable(n_classes=n_classes, columns=columns, entries=entries)


def _distances(outcomes: np.ndarray, table: IdTable, decoding: str) -> np.ndarray:
    if decoding not in DECODINGS:
        raise ConfigError(f"Unknown decoding '{decoding}' (use literal or ignore_zeros)")
    diff = outcomes[:, np.newaxis, :].astype(np.float64) - table.entries[np.newaxis, :, :]
    if decoding == "ignore_zeros":
        diff = np.where(table.entries[np.newaxis, :, :] != 0, diff, 0.0)
    return np.sqrt((diff ** 2).sum(axis=2))


def decode(outcomes: Sequence[int], table: IdTable, decoding: str = "literal") -> Tuple[int, np.ndarray]:
    """
    Nearest ID-table row to the outcome vector.

    "literal" measures the Euclidean distance over the full row, 0 entries
    included; "ignore_zeros" skips each row's 0 entries. Ties go to the lowest
    class index.
    """
    outcomes = np.asarray(outcomes)
    if outcomes.ndim != 1 or outcomes.shape[0] != table.n_columns:
        raise LengthMismatchError(f"{outcomes.shape[0] if outcomes.ndim else 0} outcomes for "
                                  f"{table.n_columns} ID-table columns")
    distances = _distances(outcomes[np.newaxis, :], table, decoding)[0]
    return int(np.argmin(distances)), distances


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Rows sorted by feature values, then label, so input order cannot matter.
    return np.lexsort(np.vstack([y, X.T[::-1]]))


def train_binary(pos: np.ndarray, neg: np.ndarray, C: float = DEFAULT_C, seed: int = 0,
                 class_pos: int = 0, class_neg: int = 1,
                 tolerance: float = SVM_TOLERANCE, max_epochs: int = SVM_MAX_EPOCHS) -> BinarySvm:
    """
    Soft-margin linear SVM (hinge loss, L2 regularization) by dual coordinate descent.

    The bias is learned as the weight of an extra constant feature. Each epoch
    visits the examples in a seeded random order; training stops once the
    spread of the projected gradient (max - min) is within tolerance, or after
    max_epochs.

    :param pos: (n_pos, d) features labelled +1.
    :param neg: (n_neg, d) features labelled -1.
    :param C: Penalty on the hinge loss.
    :param seed: Seed of the visiting order.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise EmptyClassError(f"Learner ({class_pos}, {class_neg}) needs examples of both classes")
    if pos.shape[1] != neg.shape[1]:
        raise DimensionMismatchError(f"Feature lengths differ: {pos.shape[1]} vs {neg.shape[1]}")
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")

    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    order = _canonical_order(X, y)
    X = np.hstack([X[order], np.ones((X.shape[0], 1))])
    y = y[order]

    n = X.shape[0]
    q_diag = (X * X).sum(axis=1)
    alpha = np.zeros(n)
    w = np.zeros(X.shape[1])
    rng = np.random.default_rng(seed)
    epochs = 0
    converged = False
    for epochs in range(1, max_epochs + 1):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            g = y[i] * (w @ X[i]) - 1.0
            if alpha[i] == 0.0:
                pg = min(g, 0.0)
            elif alpha[i] == C:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - g / q_diag[i], 0.0), C)
                w += (alpha[i] - old) * y[i] * X[i]
        if pg_max - pg_min <= tolerance:
            converged = True
            break
    if not converged:
        logging.debug("SVM (%d, %d) stopped at the %d-epoch cap before reaching tolerance %g",
                      class_pos, class_neg, max_epochs, tolerance)

    w = X.T @ (alpha * y)
    return BinarySvm(class_pos=class_pos, class_neg=class_neg, weights=w[:-1], bias=float(w[-1]),
                     C=C, seed=seed, epochs=epochs, converged=converged)


def train_multiclass(features: np.ndarray, labels: Sequence[str], C: float = DEFAULT_C, seed: int = 0,
                     class_names: Optional[Sequence[str]] = None, feature_spec: Optional[FeatureSpec] = None,
                     threads: int = 1) -> MsvmModel:
    """
    Trains one binary learner per ID-table column on that pair's examples only.

    :param features: (n, d) feature matrix.
    :param labels: Class name of every row.
    :param class_names: Class order of the model; sorted unique labels when omitted.
    :param threads: Learners train in parallel when > 1; results do not depend on it.
    """
    X = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise LengthMismatchError(f"{len(labels)} labels for feature matrix of shape {X.shape}")
    names = tuple(class_names) if class_names is not None else tuple(sorted(set(labels)))
    if len(names) < 2:
        raise MissingClassError(f"Training needs at least 2 classes, got {len(names)}")
    index = {name: i for i, name in enumerate(names)}
    unknown = sorted(set(labels) - set(index))
    if unknown:
        raise MissingClassError(f"Labels not among the model classes: {unknown}")
    y = np.array([index[label] for label in labels])
    missing = [name for i, name in enumerate(names) if not (y == i).any()]
    if missing:
        raise MissingClassError(f"No training examples for: {missing}")

    table = build_id_table(len(names))

    def train_pair(pair: Tuple[int, int]) -> BinarySvm:
        i, j = pair
        return train_binary(X[y == i], X[y == j], C, derive_seed(seed, "svm", i, j), class_pos=i, class_neg=j)

    learners = parallel_map(train_pair, table.columns, threads)
    model = MsvmModel(id_table=table, learners=tuple(learners), class_names=names,
                      feature_spec=feature_spec, C=C, seed=seed)
    logging.info("Trained %d pairwise learners for %d classes (max %d epochs, %d at the cap)",
                 len(learners), len(names), max(learner.epochs for learner in learners), model.capped_learners)
    return model


def predict(model: MsvmModel, x: Union[FeatureVector, np.ndarray], decoding: str = "literal") -> Prediction:
    """Sign outcomes of every learner, decoded to the nearest class row."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != model.feature_length:
        raise DimensionMismatchError(f"Feature length {values.shape} does not match model ({model.feature_length})")
    outcomes = np.array([learner.outcome(values) for learner in model.learners], dtype=np.int8)
    class_id, distances = decode(outcomes, model.id_table, decoding)
    return Prediction(class_id=class_id, outcomes=outcomes, distances=distances)


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------

def save_model(model: MsvmModel, path: Union[str, Path]) -> None:
    """
    Writes the line-oriented model text format.

    Header lines give the format version, class count, tab-separated class
    names, feature spec token, C and seed; then one block per learner with its
    class pair, bias and weights. Floats are written in shortest round-trip
    form so a reloaded model predicts identically.
    """
    for name in model.class_names:
        if not name or any(ch in name for ch in "\t\r\n"):
            raise ModelFormatError(f"Class name {name!r} cannot be stored in a model file")
    lines = [
        f"{MODEL_FORMAT_NAME} {MODEL_FORMAT_VERSION}",
        f"n_classes {model.n_classes}",
        "classes\t" + "\t".join(model.class_names),
        f"feature_spec {model.feature_spec.token() if model.feature_spec else '-'}",
        f"C {format_float(model.C)}",
        f"seed {model.seed}",
        f"learners {len(model.learners)} {model.feature_length}",
    ]
    for learner in model.learners:
        lines.append(f"learner {learner.class_pos} {learner.class_neg}")
        lines.append(f"bias {format_float(learner.bias)}")
        lines.append("weights " + " ".join(format_float(v) for v in learner.weights))
    path = ensure_parent(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logging.info("Saved model with %d learners to %s", len(model.learners), path)


def _field(line: str, key: str) -> str:
    name, _, value = line.partition(" " if key != "classes" else "\t")
    if name != key:
        raise ModelFormatError(f"Expected '{key}' line, got {line[:40]!r}")
    return value


def load_model(path: Union[str, Path]) -> MsvmModel:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"Model file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        header = lines[0].split()
        if len(header) != 2 or header[0] != MODEL_FORMAT_NAME:
            raise ModelFormatError(f"{path} is not a {MODEL_FORMAT_NAME} model file")
        if int(header[1]) != MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"Unsupported model format version {header[1]}")
        n_classes = int(_field(lines[1], "n_classes"))
        class_names = tuple(_field(lines[2], "classes").split("\t"))
        spec_token = _field(lines[3], "feature_spec")
        feature_spec = None if spec_token == "-" else FeatureSpec.parse(spec_token)
        C = float(_field(lines[4], "C"))
        seed = int(_field(lines[5], "seed"))
        n_learners, length = (int(v) for v in _field(lines[6], "learners").split())

        learners: List[BinarySvm] = []
        cursor = 7
        for _ in range(n_learners):
            pos, neg = (int(v) for v in _field(lines[cursor], "learner").split())
            bias = float(_field(lines[cursor + 1], "bias"))
            weights = np.array([float(v) for v in _field(lines[cursor + 2], "weights").split()])
            if weights.shape[0] != length:
                raise ModelFormatError(f"Learner ({pos}, {neg}) has {weights.shape[0]} weights, expected {length}")
            learners.append(BinarySvm(pos, neg, weights, bias, C, derive_seed(seed, "svm", pos, neg)))
            cursor += 3
        table = build_id_table(n_classes)
    except (IndexError, ValueError, ConfigError, FeatureFormatError) as e:
        raise ModelFormatError(f"Malformed model file {path}: {e}") from e

    return MsvmModel(id_table=table, learners=tuple(learners), class_names=class_names,
                     feature_spec=feature_spec, C=C, seed=seed)
