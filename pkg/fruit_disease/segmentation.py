"""
K-means defect segmentation in the a*b* plane.

Steps: read the RGB image, convert it to L*a*b*, cluster the (a*, b*) pairs
of every pixel with K-means (squared Euclidean distance), label each pixel,
produce one image per cluster and select the cluster holding the defect.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .constants import DEFAULT_K, DEFAULT_MAX_ITERATIONS, DEFAULT_RESTARTS, DEFAULT_TOLERANCE
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyClusterError,
    TooFewPixelsError,
    WrongColorSpaceError,
)
from .image_io import ColorSpace, RasterImage, rgb_to_lab


@dataclass(frozen=True)
class KMeansConfig:
    k: int = DEFAULT_K
    seed: int = 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    restarts: int = DEFAULT_RESTARTS

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be at least 1, got {self.max_iterations}")
        if self.tolerance < 0:
            raise ConfigError(f"tolerance must be non-negative, got {self.tolerance}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be at least 1, got {self.restarts}")


class SelectionMode(Enum):
    DARKEST_L = "darkest"
    FARTHEST_FROM_DOMINANT = "outlier"
    MANUAL = "manual"


@dataclass(frozen=True)
class ClusterSelectionPolicy:
    mode: SelectionMode = SelectionMode.FARTHEST_FROM_DOMINANT
    index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.mode is SelectionMode.MANUAL and (self.index is None or self.index < 0):
            raise ConfigError("manual cluster selection needs a non-negative index")

    def token(self) -> str:
        if self.mode is SelectionMode.MANUAL:
            return f"manual:{self.index}"
        return self.mode.value


def parse_policy(text: str) -> ClusterSelectionPolicy:
    """Parses 'darkest', 'outlier' or 'manual:<i>'."""
    text = text.strip().lower()
    if text.startswith("manual:"):
        try:
            index = int(text.split(":", 1)[1])
        except ValueError as e:
            raise ConfigError(f"Invalid manual cluster index in '{text}'") from e
        return ClusterSelectionPolicy(SelectionMode.MANUAL, index)
    for mode in (SelectionMode.DARKEST_L, SelectionMode.FARTHEST_FROM_DOMINANT):
        if text == mode.value:
            return ClusterSelectionPolicy(mode)
    raise ConfigError(f"Unknown cluster selection policy '{text}' (use darkest, outlier or manual:<i>)")


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    labels: np.ndarray                      # (height, width) cluster index per pixel
    centroids: np.ndarray                   # (k, 2) points in (a*, b*)
    objective: float
    history: Tuple[float, ...] = ()         # objective after every assignment step
    iterations: int = 0
    defect_mask: Optional[np.ndarray] = None
    selected: Tuple[int, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.k)


@dataclass(frozen=True, eq=False)
class LloydResult:
    labels: np.ndarray
    centroids: np.ndarray
    history: List[float] = field(default_factory=list)
    iterations: int = 0


def _assign(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, np.newaxis, :] - centroids[np.newaxis, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(points.shape[0]), labels]


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            index = rng.choice(n, p=closest / total)
        else:
            index = rng.integers(n)
        centroids[c] = points[index]
        closest = np.minimum(closest, ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _cluster_mean(members: np.ndarray) -> np.ndarray:
    # Shifted mean: exact when every member is identical.
    ref = members[0]
    return ref + (members - ref).mean(axis=0)


def _update(points: np.ndarray, labels: np.ndarray, d2: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    updated = centroids.copy()
    empty = []
    for c in range(k):
        members = points[labels == c]
        if members.shape[0]:
            updated[c] = _cluster_mean(members)
        else:
            empty.append(c)
    if empty:
        # Reseed each empty cluster on the pixel farthest from its centroid.
        farthest = np.argsort(-d2, kind="stable")
        for c, index in zip(empty, farthest):
            logging.debug("Cluster %d is empty; reseeding on pixel %d", c, index)
            updated[c] = points[index]
    return updated


def lloyd_kmeans(points: np.ndarray, k: int, seed: int,
                 max_iterations: int = DEFAULT_MAX_ITERATIONS,
                 tolerance: float = DEFAULT_TOLERANCE, restarts: int = 1) -> LloydResult:
    """
    Lloyd iterations with k-means++ seeding over an (n, d) point array.

    Each run stops once the largest centroid movement drops below tolerance or
    after max_iterations updates. With restarts > 1, every run draws its
    seeding from the same generator in turn and the run with the lowest final
    objective wins (the earliest on ties). The returned labels are the
    nearest-centroid assignment for the returned centroids (ties go to the
    lower index).
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if points.shape[0] < k:
        raise TooFewPixelsError(f"{points.shape[0]} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    best: Optional[LloydResult] = None
    for _ in range(max(1, restarts)):
        result = _lloyd_run(points, k, rng, max_iterations, tolerance)
        if best is None or result.history[-1] < best.history[-1]:
            best = result
    return best


def _lloyd_run(points: np.ndarray, k: int, rng: np.random.Generator,
               max_iterations: int, tolerance: float) -> LloydResult:
    centroids = _kmeans_plus_plus(points, k, rng)
    labels, d2 = _assign(points, centroids)
    history = [float(d2.sum())]
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        updated = _update(points, labels, d2, centroids)
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        labels, d2 = _assign(points, centroids)
        history.append(float(d2.sum()))
        if history[-1] > history[-2]:
            logging.warning("K-means objective increased from %r to %r at iteration %d",
                            history[-2], history[-1], iterations)
        if shift < tolerance:
            break
    logging.debug("K-means converged after %d iterations, objective %.6f", iterations, history[-1])
    return LloydResult(labels=labels, centroids=centroids, history=history, iterations=iterations)


def kmeans_ab(lab: RasterImage, cfg: KMeansConfig) -> SegmentationResult:
    """Clusters the (a*, b*) pairs of every pixel; the defect mask is left unset."""
    if lab.colorspace is not ColorSpace.LAB:
        raise WrongColorSpaceError(f"K-means runs on LAB images, got {lab.colorspace.name}")
    if lab.pixel_count < cfg.k:
        raise TooFewPixelsError(f"{lab.pixel_count} pixels cannot form {cfg.k} clusters")
    points = lab.data[:, :, 1:3].reshape(-1, 2)
    result = lloyd_kmeans(points, cfg.k, cfg.seed, cfg.max_iterations, cfg.tolerance, cfg.restarts)
    return SegmentationResult(
        labels=result.labels.reshape(lab.height, lab.width),
        centroids=result.centroids,
        objective=result.history[-1],
        history=tuple(result.history),
        iterations=result.iterations,
    )


def select_defect_cluster(seg: SegmentationResult, lab: RasterImage,
                          policy: ClusterSelectionPolicy) -> SegmentationResult:
    """Chooses the disease-containing cluster and sets the defect mask."""
    if seg.labels.shape != lab.shape:
        raise DimensionMismatchError(f"Labels {seg.labels.shape} do not match image {lab.shape}")
    counts = seg.counts()
    if policy.mode is SelectionMode.MANUAL:
        if policy.index >= seg.k:
            raise ConfigError(f"Manual cluster index {policy.index} is out of range for k={seg.k}")
        chosen = policy.index
    elif policy.mode is SelectionMode.DARKEST_L:
        sums = np.bincount(seg.labels.ravel(), weights=lab.data[:, :, 0].ravel(), minlength=seg.k)
        mean_l = np.where(counts > 0, sums / np.maximum(counts, 1), np.inf)
        chosen = int(np.argmin(mean_l))
    else:
        dominant = int(np.argmax(counts))
        distance = ((seg.centroids - seg.centroids[dominant]) ** 2).sum(axis=1)
        distance = np.where(counts > 0, distance, -1.0)
        chosen = int(np.argmax(distance))
    if counts[chosen] == 0:
        raise EmptyClusterError(f"Selected cluster {chosen} has no pixels")
    logging.debug("Selected cluster %d (%d pixels) by %s", chosen, counts[chosen], policy.token())
    return replace(seg, defect_mask=seg.labels == chosen, selected=(chosen,))


def apply_mask(img: RasterImage, mask: np.ndarray) -> RasterImage:
    """Zeroes every pixel outside the mask in all channels."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape:
        raise DimensionMismatchError(f"Mask {mask.shape} does not match image {img.shape}")
    data = np.where(mask[:, :, np.newaxis], img.data, np.zeros((), dtype=img.data.dtype))
    return RasterImage.from_array(data, img.colorspace)


def cluster_images(img: RasterImage, seg: SegmentationResult) -> List[RasterImage]:
    """One image per cluster, showing only that cluster's pixels."""
    return [apply_mask(img, seg.labels == c) for c in range(seg.k)]


def label_map(seg: SegmentationResult) -> np.ndarray:
    """Single 8-bit gray image coloured by cluster index."""
    scale = 255.0 / max(seg.k - 1, 1)
    return np.rint(seg.labels * scale).astype(np.uint8)


def segment_image(rgb: RasterImage, cfg: KMeansConfig, policy: ClusterSelectionPolicy) -> SegmentationResult:
    """Read, convert, cluster, label and select in one call."""
    lab = rgb_to_lab(rgb)
    seg = kmeans_ab(lab, cfg)
    return select_defect_cluster(seg, lab, policy)
