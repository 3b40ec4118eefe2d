"""
Tests for a*b* K-means clustering and defect cluster selection.
"""

from dataclasses import replace

import numpy as np
import pytest

from fruit_disease.constants import DEFAULT_IMAGE_SIZE, SYNTHETIC_CLASSES
from fruit_disease.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyClusterError,
    TooFewPixelsError,
    WrongColorSpaceError,
)
from fruit_disease.image_io import ColorSpace, RasterImage, rgb_to_lab
from fruit_disease.segmentation import (
    ClusterSelectionPolicy,
    KMeansConfig,
    SegmentationResult,
    SelectionMode,
    apply_mask,
    cluster_images,
    kmeans_ab,
    label_map,
    lloyd_kmeans,
    parse_policy,
    segment_image,
    select_defect_cluster,
)
from fruit_disease.synthetic import render_sample


def rgb(array):
    return RasterImage.from_array(np.asarray(array, dtype=np.uint8), ColorSpace.RGB8)


def patches(colors, size=6):
    """Horizontal strip of solid square patches, one per colour."""
    data = np.zeros((size, size * len(colors), 3), dtype=np.uint8)
    for n, color in enumerate(colors):
        data[:, n * size:(n + 1) * size] = color
    return rgb(data)


def recomputed_objective(seg, lab):
    points = lab.data[:, :, 1:3].reshape(-1, 2)
    return float(((points - seg.centroids[seg.labels.ravel()]) ** 2).sum())


def test_config_validation():
    KMeansConfig(k=3)
    for bad in (dict(k=1), dict(max_iterations=0), dict(tolerance=-1.0), dict(restarts=0)):
        with pytest.raises(ConfigError):
            KMeansConfig(**bad)


def test_two_solid_colors_give_exact_centroids():
    img = patches([(200, 30, 30), (30, 30, 200)])
    lab = rgb_to_lab(img)
    seg = kmeans_ab(lab, KMeansConfig(k=2, seed=1))

    assert seg.objective == 0.0
    left, right = seg.labels[0, 0], seg.labels[0, -1]
    assert left != right
    assert np.all(seg.labels[:, :6] == left) and np.all(seg.labels[:, 6:] == right)
    np.testing.assert_array_equal(seg.centroids[left], lab.data[0, 0, 1:3])
    np.testing.assert_array_equal(seg.centroids[right], lab.data[0, -1, 1:3])


def test_single_cluster_is_the_mean():
    rng = np.random.default_rng(2)
    points = rng.normal(size=(50, 2))
    result = lloyd_kmeans(points, 1, seed=0)
    np.testing.assert_allclose(result.centroids[0], points.mean(axis=0), atol=1e-12)


def test_four_hues_match_brute_force_assignment():
    img = patches([(220, 40, 40), (40, 200, 40), (40, 60, 220), (230, 220, 40)], size=5)
    lab = rgb_to_lab(img)
    seg = kmeans_ab(lab, KMeansConfig(k=4, seed=3))

    points = lab.data[:, :, 1:3].reshape(-1, 2)
    d2 = ((points[:, None, :] - seg.centroids[None, :, :]) ** 2).sum(axis=2)
    assert np.array_equal(seg.labels.ravel(), d2.argmin(axis=1))
    # one cluster per generator colour
    for n in range(4):
        block = seg.labels[:, n * 5:(n + 1) * 5]
        assert np.all(block == block[0, 0])
    assert len({int(seg.labels[0, n * 5]) for n in range(4)}) == 4


def test_objective_matches_labels():
    rng = np.random.default_rng(7)
    img = rgb(rng.integers(0, 256, (24, 24, 3)))
    lab = rgb_to_lab(img)
    seg = kmeans_ab(lab, KMeansConfig(k=4, seed=11))

    assert len(seg.history) == seg.iterations + 1
    assert abs(recomputed_objective(seg, lab) - seg.objective) <= 1e-6 * max(seg.objective, 1.0)
    assert seg.labels.min() >= 0 and seg.labels.max() < seg.k


@pytest.mark.parametrize("k", [3, 4])
def test_objective_never_increases_on_random_lab_images(k):
    for seed in range(50):
        rng = np.random.default_rng(seed)
        data = np.stack([rng.uniform(0, 100, (20, 20)), rng.uniform(-128, 128, (20, 20)),
                         rng.uniform(-128, 128, (20, 20))], axis=-1)
        seg = kmeans_ab(RasterImage.from_array(data, ColorSpace.LAB), KMeansConfig(k=k, seed=seed))
        for before, after in zip(seg.history, seg.history[1:]):
            assert after <= before, f"seed {seed}: objective rose from {before!r} to {after!r}"


def test_fixed_seed_is_bit_identical():
    rng = np.random.default_rng(9)
    lab = rgb_to_lab(rgb(rng.integers(0, 256, (16, 20, 3))))
    a = kmeans_ab(lab, KMeansConfig(k=4, seed=5))
    b = kmeans_ab(lab, KMeansConfig(k=4, seed=5))
    assert a.labels.tobytes() == b.labels.tobytes()
    assert a.centroids.tobytes() == b.centroids.tobytes()


def test_uniform_image_does_not_crash():
    lab = rgb_to_lab(patches([(90, 120, 60)]))
    seg = kmeans_ab(lab, KMeansConfig(k=3, seed=0))
    assert seg.objective == 0.0
    assert seg.counts().max() == lab.pixel_count
    chosen = select_defect_cluster(seg, lab, ClusterSelectionPolicy())
    assert chosen.defect_mask.all()


def test_input_errors():
    one_pixel = rgb_to_lab(rgb([[[10, 20, 30]]]))
    with pytest.raises(TooFewPixelsError):
        kmeans_ab(one_pixel, KMeansConfig(k=2))
    with pytest.raises(WrongColorSpaceError):
        kmeans_ab(patches([(1, 2, 3)]), KMeansConfig(k=2))


def test_darkest_policy_picks_dark_brown():
    img = patches([(90, 50, 20), (240, 40, 40)])
    lab = rgb_to_lab(img)
    seg = kmeans_ab(lab, KMeansConfig(k=2, seed=0))
    chosen = select_defect_cluster(seg, lab, parse_policy("darkest"))
    assert chosen.defect_mask[:, :6].all()
    assert not chosen.defect_mask[:, 6:].any()


def test_manual_policy_and_mask_consistency():
    rng = np.random.default_rng(4)
    lab = rgb_to_lab(rgb(rng.integers(0, 256, (12, 12, 3))))
    seg = kmeans_ab(lab, KMeansConfig(k=4, seed=1))
    chosen = select_defect_cluster(seg, lab, parse_policy("manual:2"))
    assert chosen.selected == (2,)
    assert np.array_equal(chosen.defect_mask, seg.labels == 2)

    with pytest.raises(ConfigError):
        select_defect_cluster(seg, lab, parse_policy("manual:4"))


def test_empty_manual_cluster_is_reported():
    labels = np.zeros((2, 2), dtype=np.int64)
    seg = SegmentationResult(labels=labels, centroids=np.zeros((2, 2)), objective=0.0)
    lab = rgb_to_lab(patches([(1, 1, 1)], size=2))
    with pytest.raises(EmptyClusterError):
        select_defect_cluster(seg, lab, ClusterSelectionPolicy(SelectionMode.MANUAL, 1))


def test_selection_rejects_foreign_labels():
    lab = rgb_to_lab(patches([(1, 1, 1)], size=3))
    seg = SegmentationResult(labels=np.zeros((2, 2), dtype=np.int64), centroids=np.zeros((2, 2)), objective=0.0)
    with pytest.raises(DimensionMismatchError):
        select_defect_cluster(seg, lab, ClusterSelectionPolicy())


def test_parse_policy_tokens():
    assert parse_policy("outlier").mode is SelectionMode.FARTHEST_FROM_DOMINANT
    assert parse_policy(" Darkest ").mode is SelectionMode.DARKEST_L
    assert parse_policy("manual:3").token() == "manual:3"
    for bad in ("brightest", "manual:x", "manual:-1"):
        with pytest.raises(ConfigError):
            parse_policy(bad)


def lesion_iou(kind, seed, cfg):
    img, lesion = render_sample(kind, DEFAULT_IMAGE_SIZE, np.random.default_rng(seed))
    seg = segment_image(img, replace(cfg, seed=seed), parse_policy("outlier"))
    mask = seg.defect_mask
    return np.logical_and(mask, lesion).sum() / np.logical_or(mask, lesion).sum()


LESION_CLASSES = [kind for kind in SYNTHETIC_CLASSES if kind != "normal"]


@pytest.mark.parametrize("kind", LESION_CLASSES)
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_outlier_policy_finds_synthetic_lesion(kind, seed):
    assert lesion_iou(kind, seed, KMeansConfig()) >= 0.9


@pytest.mark.parametrize("kind", LESION_CLASSES)
def test_outlier_policy_finds_synthetic_lesion_with_three_clusters(kind):
    assert lesion_iou(kind, 4, KMeansConfig(k=3)) >= 0.9


def test_apply_mask_selects_per_pixel():
    rng = np.random.default_rng(6)
    img = rgb(rng.integers(0, 256, (7, 9, 3)))
    mask = rng.random((7, 9)) < 0.5
    out = apply_mask(img, mask)
    expected = np.where(mask[:, :, None], img.data, 0)
    assert np.array_equal(out.data, expected)

    assert apply_mask(img, np.ones((7, 9), dtype=bool)) == img
    assert not apply_mask(img, np.zeros((7, 9), dtype=bool)).data.any()
    with pytest.raises(DimensionMismatchError):
        apply_mask(img, np.ones((9, 7), dtype=bool))


def test_cluster_images_partition_the_image():
    rng = np.random.default_rng(12)
    img = rgb(rng.integers(0, 256, (10, 10, 3)))
    seg = kmeans_ab(rgb_to_lab(img), KMeansConfig(k=3, seed=2))
    parts = cluster_images(img, seg)
    assert len(parts) == 3
    total = sum(p.data.astype(np.int64) for p in parts)
    assert np.array_equal(total, img.data.astype(np.int64))


def test_label_map_spreads_cluster_indices():
    labels = np.array([[0, 1], [2, 3]])
    seg = SegmentationResult(labels=labels, centroids=np.zeros((4, 2)), objective=0.0)
    assert label_map(seg).tolist() == [[0, 85], [170, 255]]
