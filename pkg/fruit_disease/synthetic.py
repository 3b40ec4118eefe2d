"""
Synthetic fruit images for exercising the pipeline without a photo dataset.

Every image is a fruit-coloured disk on a dark background. Scenes are painted
in L*a*b*: the background carries the fruit's chroma and differs only in
lightness, and every lesion pixel of an image shares one chroma far from the
fruit's, with the disease texture drawn in L* alone:

- apple_scab: several small gray corky spots with a fine netted texture
- apple_rot: one circular brown spot of concentric rings inside a pale halo
- apple_blotch: a few dark lobed irregular patches crossed by streaks
- normal: no lesion
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import yaml

from .constants import DEFAULT_IMAGE_SIZE, DEFAULT_NOISE, DEFAULT_PER_CLASS, SYNTHETIC_CLASSES
from .errors import ConfigError
from .helpers import derive_seed
from .image_io import ColorSpace, RasterImage, lab_to_rgb, save_image
from .runtime import lazy_importer, parallel_map

Lab = Tuple[float, float, float]

BACKGROUND_LAB: Lab = (35.0, -20.0, 35.0)
FRUIT_LAB: Lab = (65.0, -20.0, 35.0)
COLOR_JITTER = 2.0
RING_PERIOD = 6.0
MIN_IMAGE_SIZE = 32
MANIFEST_NAME = "manifest.yaml"


@dataclass(frozen=True)
class LesionStyle:
    chroma: Tuple[float, float]     # (a*, b*) of every lesion pixel
    dark: float                     # L* where the texture phase is 0
    light: float                    # L* where the texture phase is 1


LESION_STYLES = {
    "apple_scab": LesionStyle(chroma=(3.0, 0.0), dark=30.0, light=58.0),
    "apple_rot": LesionStyle(chroma=(24.0, 26.0), dark=24.0, light=52.0),
    "apple_blotch": LesionStyle(chroma=(12.0, 8.0), dark=20.0, light=42.0),
}


def _vary(rng: np.random.Generator, values: Tuple[float, ...], amount: float) -> Tuple[float, ...]:
    return tuple(float(v + rng.uniform(-amount, amount)) for v in values)


def _point_in_disk(rng: np.random.Generator, center: Tuple[float, float], radius: float) -> Tuple[int, int]:
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return int(round(center[0] + r * math.cos(theta))), int(round(center[1] + r * math.sin(theta)))


def _draw_scab(cv2, fruit, center, radius, size, rng) -> Tuple[np.ndarray, np.ndarray]:
    layer = np.zeros(fruit.shape, dtype=np.uint8)
    lo = max(2, int(round(0.03 * size)))
    hi = max(lo + 1, int(round(0.055 * size)))
    for _ in range(int(rng.integers(8, 15))):
        cv2.circle(layer, _point_in_disk(rng, center, 0.7 * radius), int(rng.integers(lo, hi + 1)), 1, -1)
    yy, xx = np.indices(fruit.shape)
    phase = ((yy + xx) % 2).astype(np.float64)
    return layer.astype(bool) & fruit, phase


def _draw_rot(cv2, fruit, center, radius, size, rng) -> Tuple[np.ndarray, np.ndarray]:
    core_radius = max(3, int(round(rng.uniform(0.10, 0.14) * size)))
    halo_width = max(2, int(round(0.03 * size)))
    spot = _point_in_disk(rng, center, 0.35 * radius)
    layer = np.zeros(fruit.shape, dtype=np.uint8)
    cv2.circle(layer, spot, core_radius + halo_width, 1, -1)
    yy, xx = np.indices(fruit.shape)
    ring = np.hypot(xx - spot[0], yy - spot[1]) / RING_PERIOD
    phase = np.abs(2.0 * (ring - np.floor(ring)) - 1.0)
    phase[ring * RING_PERIOD > core_radius] = 1.0
    return layer.astype(bool) & fruit, phase


def _draw_blotch(cv2, fruit, center, radius, size, rng) -> Tuple[np.ndarray, np.ndarray]:
    layer = np.zeros(fruit.shape, dtype=np.uint8)
    angles = np.linspace(0.0, 2.0 * math.pi, 24, endpoint=False)
    for _ in range(int(rng.integers(3, 6))):
        cx, cy = _point_in_disk(rng, center, 0.6 * radius)
        base = rng.uniform(0.06, 0.10) * size
        lobes = int(rng.integers(3, 6))
        radii = base * (1.0 + 0.35 * np.sin(lobes * angles + rng.uniform(0.0, 2.0 * math.pi)))
        radii *= rng.uniform(0.85, 1.15, angles.shape[0])
        points = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)
        cv2.fillPoly(layer, [np.rint(points).astype(np.int32)], 1)
    yy, _ = np.indices(fruit.shape)
    phase = (yy % 2).astype(np.float64)
    return layer.astype(bool) & fruit, phase


_LESIONS = {
    "apple_scab": _draw_scab,
    "apple_rot": _draw_rot,
    "apple_blotch": _draw_blotch,
}


def render_sample(kind: str, size: int, rng: np.random.Generator,
                  noise: float = DEFAULT_NOISE) -> Tuple[RasterImage, np.ndarray]:
    """
    Draws one synthetic fruit image.

    :param kind: One of SYNTHETIC_CLASSES.
    :param size: Image width and height in pixels.
    :param noise: Standard deviation of the additive Gaussian pixel noise, in 8-bit RGB units.
    :return: The RGB8 image and the boolean mask of lesion pixels (all False for normal).
    """
    if kind not in SYNTHETIC_CLASSES:
        raise ConfigError(f"Unknown synthetic class '{kind}' (use one of {', '.join(SYNTHETIC_CLASSES)})")
    if size < MIN_IMAGE_SIZE:
        raise ConfigError(f"Synthetic images must be at least {MIN_IMAGE_SIZE} pixels, got {size}")
    if noise < 0:
        raise ConfigError(f"Noise must be non-negative, got {noise}")
    cv2 = lazy_importer.get_cv2()

    # background and fruit share one chroma per image
    chroma = _vary(rng, FRUIT_LAB[1:], COLOR_JITTER)
    canvas = np.empty((size, size, 3), dtype=np.float64)
    canvas[:] = (BACKGROUND_LAB[0] + rng.uniform(-COLOR_JITTER, COLOR_JITTER),) + chroma
    center = (size / 2.0 + rng.uniform(-0.02, 0.02) * size, size / 2.0 + rng.uniform(-0.02, 0.02) * size)
    radius = 0.45 * size
    disk = np.zeros((size, size), dtype=np.uint8)
    cv2.circle(disk, (int(round(center[0])), int(round(center[1]))), int(round(radius)), 1, -1)
    fruit = disk.astype(bool)
    canvas[fruit] = (FRUIT_LAB[0] + rng.uniform(-COLOR_JITTER, COLOR_JITTER),) + chroma

    if kind in _LESIONS:
        lesion, phase = _LESIONS[kind](cv2, fruit, center, radius, size, rng)
        style = LESION_STYLES[kind]
        a, b = _vary(rng, style.chroma, COLOR_JITTER)
        lightness = style.dark + (style.light - style.dark) * phase + rng.uniform(-COLOR_JITTER, COLOR_JITTER)
        canvas[lesion] = np.stack([lightness[lesion], np.full(lesion.sum(), a), np.full(lesion.sum(), b)], axis=1)
    else:
        lesion = np.zeros((size, size), dtype=bool)

    rgb = lab_to_rgb(RasterImage.from_array(canvas, ColorSpace.LAB)).data
    if noise > 0:
        noisy = rgb.astype(np.float64) + rng.normal(0.0, noise, rgb.shape)
        rgb = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return RasterImage.from_array(rgb, ColorSpace.RGB8), lesion


def generate_dataset(out_dir: Union[str, Path], per_class: int = DEFAULT_PER_CLASS,
                     size: int = DEFAULT_IMAGE_SIZE, noise: float = DEFAULT_NOISE, seed: int = 0,
                     threads: int = 1) -> Dict[str, Any]:
    """
    Writes out_dir/<class>/<class>_<index>.png for every synthetic class plus a
    manifest.yaml with the per-class counts and generator parameters.

    Each image has its own seed derived from (seed, class, index), so the
    output does not depend on threads.
    """
    if per_class < 1:
        raise ConfigError(f"per_class must be at least 1, got {per_class}")
    out_dir = Path(out_dir)
    jobs = [(kind, index) for kind in SYNTHETIC_CLASSES for index in range(per_class)]

    def render_one(job: Tuple[str, int]) -> None:
        kind, index = job
        rng = np.random.default_rng(derive_seed(seed, "generate", kind, index))
        img, _ = render_sample(kind, size, rng, noise)
        save_image(img, out_dir / kind / f"{kind}_{index:04d}.png")

    parallel_map(render_one, jobs, threads)
    manifest = {
        "classes": {kind: per_class for kind in SYNTHETIC_CLASSES},
        "generator": {"per_class": per_class, "size": size, "noise": float(noise), "seed": int(seed)},
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    logging.info("Generated %d synthetic images in %s", len(jobs), out_dir)
    return manifest
