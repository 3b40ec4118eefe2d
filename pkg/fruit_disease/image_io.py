"""
Raster images, colour-space conversion and PNG/JPEG input/output.

Pixel buffers are numpy arrays of shape (height, width, channels): row-major,
channel-interleaved. RGB8 is stored as uint8, every other colour space as
float64. Arrays held by RasterImage and ChannelPlane are read-only.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .constants import JPEG_SIGNATURE, PNG_SIGNATURE
from .errors import (
    CorruptImageError,
    DimensionMismatchError,
    ImageNotFoundError,
    UnsupportedFormatError,
    WrongColorSpaceError,
)
from .runtime import lazy_importer

PathLike = Union[str, Path]


class ColorSpace(Enum):
    RGB8 = "rgb8"
    HSV = "hsv"
    LAB = "lab"
    GRAY = "gray"

    @property
    def channels(self) -> int:
        return 1 if self is ColorSpace.GRAY else 3


# Per-channel value ranges used for uniform quantization.
CHANNEL_RANGES = {
    ColorSpace.RGB8: ((0.0, 256.0),) * 3,
    ColorSpace.HSV: ((0.0, 360.0), (0.0, 1.0), (0.0, 1.0)),
    ColorSpace.LAB: ((0.0, 100.0), (-128.0, 128.0), (-128.0, 128.0)),
    ColorSpace.GRAY: ((0.0, 256.0),),
}

# sRGB (D65) to XYZ
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_SRGB = np.linalg.inv(_SRGB_TO_XYZ)
_D65_WHITE = np.array([0.95047, 1.00000, 1.08883])
_CIE_EPSILON = 216.0 / 24389.0
_CIE_KAPPA = 24389.0 / 27.0


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RasterImage:
    width: int
    height: int
    colorspace: ColorSpace
    data: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.height, self.width, self.colorspace.channels)
        if self.width < 1 or self.height < 1:
            raise DimensionMismatchError(f"Image must be at least 1x1, got {self.width}x{self.height}")
        if self.data.shape != expected:
            raise DimensionMismatchError(f"Pixel buffer shape {self.data.shape} does not match {expected}")
        dtype = np.uint8 if self.colorspace is ColorSpace.RGB8 else np.float64
        object.__setattr__(self, "data", _frozen(self.data.astype(dtype, copy=False)))

    @classmethod
    def from_array(cls, array: np.ndarray, colorspace: ColorSpace) -> "RasterImage":
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        return cls(width=array.shape[1], height=array.shape[0], colorspace=colorspace, data=array)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (self.colorspace is other.colorspace
                and self.data.shape == other.data.shape
                and np.array_equal(self.data, other.data))


@dataclass(frozen=True, eq=False)
class ChannelPlane:
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"Plane shape {self.values.shape} does not match ({self.height}, {self.width})")
        object.__setattr__(self, "values", _frozen(self.values.astype(np.float64, copy=False)))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ChannelPlane":
        return cls(width=values.shape[1], height=values.shape[0], values=values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelPlane):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(self.values, other.values)


def _sniff_format(path: Path) -> str:
    with open(path, "rb") as f:
        head = f.read(8)
    if head.startswith(PNG_SIGNATURE):
        return "PNG"
    if head.startswith(JPEG_SIGNATURE):
        return "JPEG"
    raise UnsupportedFormatError(f"{path}: not a PNG or JPEG file")


def load_image(path: PathLike) -> RasterImage:
    """
    Decode a PNG or JPEG file into an RGB8 raster.

    :param path: Image file path.
    :return: RasterImage in RGB8.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(f"Image not found: {path}")
    fmt = _sniff_format(path)
    Image = lazy_importer.get_pil()
    try:
        with Image.open(path) as pil_image:
            pil_image.load()
            rgb = np.asarray(pil_image.convert("RGB"), dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(f"Failed to decode {fmt} image {path}: {e}") from e
    logging.debug("Loaded %s (%dx%d, %s)", path, rgb.shape[1], rgb.shape[0], fmt)
    return RasterImage.from_array(rgb, ColorSpace.RGB8)


def save_image(img: RasterImage, path: PathLike) -> None:
    """Encode an RGB8 raster as PNG or JPEG, chosen by the file suffix."""
    if img.colorspace is not ColorSpace.RGB8:
        raise WrongColorSpaceError(f"Only RGB8 images can be saved, got {img.colorspace.name}")
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".jpg", ".jpeg"):
        raise UnsupportedFormatError(f"Unsupported output format: {suffix or '(none)'}")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image = lazy_importer.get_pil()
    Image.fromarray(np.asarray(img.data)).save(path, format="PNG" if suffix == ".png" else "JPEG")


def save_plane_png(plane: ChannelPlane, path: PathLike) -> None:
    """Debug dump of a real-valued plane as an 8-bit PNG, linearly rescaled to [0, 255]."""
    values = plane.values
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = (values - lo) * (255.0 / (hi - lo))
    else:
        scaled = np.zeros_like(values)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image = lazy_importer.get_pil()
    Image.fromarray(np.rint(scaled).astype(np.uint8)).save(path, format="PNG")


def save_mask_png(mask: np.ndarray, path: PathLike) -> None:
    """Write a boolean mask as a 1-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image = lazy_importer.get_pil()
    Image.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255).convert("1").save(path, format="PNG")


def load_mask(path: PathLike) -> np.ndarray:
    """Read a mask PNG; any non-zero pixel is inside the mask."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(f"Mask not found: {path}")
    _sniff_format(path)
    Image = lazy_importer.get_pil()
    try:
        with Image.open(path) as pil_image:
            values = np.asarray(pil_image.convert("L"))
    except (OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(f"Failed to decode mask {path}: {e}") from e
    return values > 0


def _require(img: RasterImage, colorspace: ColorSpace) -> None:
    if img.colorspace is not colorspace:
        raise WrongColorSpaceError(f"Expected {colorspace.name} image, got {img.colorspace.name}")


def rgb_to_lab(img: RasterImage) -> RasterImage:
    """sRGB (D65) -> linear RGB -> XYZ -> CIE L*a*b*."""
    _require(img, ColorSpace.RGB8)
    rgb = img.data.astype(np.float64) / 255.0
    linear = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = linear @ _SRGB_TO_XYZ.T / _D65_WHITE
    f = np.where(xyz > _CIE_EPSILON, np.cbrt(xyz), (_CIE_KAPPA * xyz + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return RasterImage.from_array(lab, ColorSpace.LAB)


def lab_to_rgb(img: RasterImage) -> RasterImage:
    """Inverse of rgb_to_lab, rounded to 8 bits. Out-of-gamut colours are clipped in linear RGB."""
    _require(img, ColorSpace.LAB)
    lab = img.data
    f = np.empty_like(lab)
    f[..., 1] = (lab[..., 0] + 16.0) / 116.0
    f[..., 0] = f[..., 1] + lab[..., 1] / 500.0
    f[..., 2] = f[..., 1] - lab[..., 2] / 200.0
    xyz = np.where(f ** 3 > _CIE_EPSILON, f ** 3, (116.0 * f - 16.0) / _CIE_KAPPA) * _D65_WHITE
    linear = np.clip(xyz @ _XYZ_TO_SRGB.T, 0.0, 1.0)
    rgb = np.where(linear > 0.0031308, 1.055 * linear ** (1.0 / 2.4) - 0.055, 12.92 * linear)
    data = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    return RasterImage.from_array(data, ColorSpace.RGB8)


def rgb_to_hsv(img: RasterImage) -> RasterImage:
    """Hexcone HSV: H in degrees [0, 360), S and V in [0, 1]. Achromatic pixels get H = 0."""
    _require(img, ColorSpace.RGB8)
    rgb = img.data.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    chromatic = delta > 0
    safe_delta = np.where(chromatic, delta, 1.0)

    hue = np.where(
        mx == r, np.mod((g - b) / safe_delta, 6.0),
        np.where(mx == g, (b - r) / safe_delta + 2.0, (r - g) / safe_delta + 4.0),
    ) * 60.0
    hue = np.where(chromatic, hue, 0.0)
    hue = np.where(hue >= 360.0, hue - 360.0, hue)

    saturation = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    value = mx / 255.0
    return RasterImage.from_array(np.stack([hue, saturation, value], axis=-1), ColorSpace.HSV)


def convert(img: RasterImage, target: ColorSpace) -> RasterImage:
    """Convert an RGB8 image into the target colour space."""
    if img.colorspace is target:
        return img
    _require(img, ColorSpace.RGB8)
    if target is ColorSpace.HSV:
        return rgb_to_hsv(img)
    if target is ColorSpace.LAB:
        return rgb_to_lab(img)
    raise WrongColorSpaceError(f"No conversion from RGB8 to {target.name}")


def split_channels(img: RasterImage) -> List[ChannelPlane]:
    """One real-valued plane per channel, in channel order."""
    return [ChannelPlane.from_array(img.data[:, :, c].astype(np.float64))
            for c in range(img.colorspace.channels)]


def merge_channels(planes: List[ChannelPlane], colorspace: ColorSpace) -> RasterImage:
    """Reassemble planes produced by split_channels."""
    if len(planes) != colorspace.channels:
        raise DimensionMismatchError(f"{colorspace.name} needs {colorspace.channels} planes, got {len(planes)}")
    shapes = {p.values.shape for p in planes}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"Planes differ in size: {sorted(shapes)}")
    stacked = np.stack([p.values for p in planes], axis=-1)
    if colorspace is ColorSpace.RGB8:
        stacked = stacked.astype(np.uint8)
    return RasterImage.from_array(stacked, colorspace)
