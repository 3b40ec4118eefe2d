"""
Colour and texture descriptors: GCH, CCV, LBP and CLBP.

Every descriptor is a histogram-family vector made of one or more blocks,
each block normalized to sum 1. LBP neighbours are numbered from angle 0
(offset +R columns) counter-clockwise as seen on screen, so neighbour n sits
at (row, column) offset (-R sin(2 pi n / N), R cos(2 pi n / N)). Off-grid
neighbours are bilinearly interpolated.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    DEFAULT_CCV_COLORS,
    DEFAULT_CCV_TAU_FRACTION,
    DEFAULT_GCH_BINS,
    DEFAULT_LBP_NEIGHBORS,
    DEFAULT_LBP_RADIUS,
)
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyMaskError,
    FeatureFormatError,
    NoValidPixelsError,
    OutOfBoundsError,
    WrongColorSpaceError,
)
from .image_io import CHANNEL_RANGES, ChannelPlane, ColorSpace, RasterImage, convert, split_channels
from .runtime import lazy_importer, parallel_map

FEATURE_COLORSPACES = {"rgb": ColorSpace.RGB8, "hsv": ColorSpace.HSV}
CLBP_THRESHOLDS = ("magnitude", "gray")
_GRID_SNAP = 1e-9


class DescriptorKind(Enum):
    GCH = "gch"
    CCV = "ccv"
    LBP = "lbp"
    CLBP = "clbp"


@dataclass(frozen=True)
class LbpParams:
    neighbors: int = DEFAULT_LBP_NEIGHBORS
    radius: int = DEFAULT_LBP_RADIUS

    def __post_init__(self) -> None:
        if self.neighbors < 4:
            raise ConfigError(f"LBP needs at least 4 neighbours, got {self.neighbors}")
        if self.radius < 1:
            raise ConfigError(f"LBP radius must be at least 1, got {self.radius}")

    @property
    def max_code(self) -> int:
        return (1 << self.neighbors) - 1

    @property
    def n_codes(self) -> int:
        return 1 << self.neighbors


@dataclass(frozen=True)
class DescriptorId:
    kind: DescriptorKind
    bins: int = DEFAULT_GCH_BINS
    n_colors: int = DEFAULT_CCV_COLORS
    tau: Optional[int] = None
    blur: bool = True
    lbp: LbpParams = field(default_factory=LbpParams)
    clbp_threshold: str = "magnitude"

    def __post_init__(self) -> None:
        if self.kind is DescriptorKind.GCH and self.bins < 2:
            raise ConfigError(f"GCH needs at least 2 bins per channel, got {self.bins}")
        if self.kind is DescriptorKind.CCV:
            if self.n_colors < 2:
                raise ConfigError(f"CCV needs at least 2 colours, got {self.n_colors}")
            if self.tau is not None and self.tau < 1:
                raise ConfigError(f"CCV tau must be at least 1, got {self.tau}")
        if self.clbp_threshold not in CLBP_THRESHOLDS:
            raise ConfigError(f"Unknown CLBP threshold '{self.clbp_threshold}'")

    def params(self) -> Dict[str, str]:
        """The parameters that determine this descriptor, as text."""
        if self.kind is DescriptorKind.GCH:
            return {"bins": str(self.bins)}
        if self.kind is DescriptorKind.CCV:
            return {"colors": str(self.n_colors), "tau": "auto" if self.tau is None else str(self.tau),
                    "blur": "1" if self.blur else "0"}
        params = {"n": str(self.lbp.neighbors), "r": str(self.lbp.radius)}
        if self.kind is DescriptorKind.CLBP:
            params["c"] = self.clbp_threshold
        return params

    def block_sizes(self, channels: int = 3) -> Tuple[int, ...]:
        """Length of each normalized block for an image with the given channel count."""
        if self.kind is DescriptorKind.GCH:
            return (self.bins ** channels,)
        if self.kind is DescriptorKind.CCV:
            return (2 * self.n_colors,)
        if self.kind is DescriptorKind.LBP:
            return (self.lbp.n_codes,) * channels
        return (self.lbp.n_codes, self.lbp.n_codes, 2) * channels

    def length(self, channels: int = 3) -> int:
        return sum(self.block_sizes(channels))

    def token(self) -> str:
        return self.kind.value + ":" + ";".join(f"{k}={v}" for k, v in self.params().items())

    @classmethod
    def parse(cls, token: str) -> "DescriptorId":
        kind_text, _, param_text = token.partition(":")
        try:
            kind = DescriptorKind(kind_text.strip().lower())
        except ValueError as e:
            raise FeatureFormatError(f"Unknown descriptor kind in '{token}'") from e
        params = {}
        for item in filter(None, param_text.split(";")):
            key, sep, value = item.partition("=")
            if not sep:
                raise FeatureFormatError(f"Malformed descriptor parameter '{item}' in '{token}'")
            params[key.strip()] = value.strip()
        try:
            if kind is DescriptorKind.GCH:
                return cls(kind, bins=int(params.get("bins", DEFAULT_GCH_BINS)))
            if kind is DescriptorKind.CCV:
                tau = params.get("tau", "auto")
                return cls(kind, n_colors=int(params.get("colors", DEFAULT_CCV_COLORS)),
                           tau=None if tau == "auto" else int(tau),
                           blur=params.get("blur", "1") == "1")
            lbp = LbpParams(int(params.get("n", DEFAULT_LBP_NEIGHBORS)), int(params.get("r", DEFAULT_LBP_RADIUS)))
            return cls(kind, lbp=lbp, clbp_threshold=params.get("c", "magnitude"))
        except ValueError as e:
            raise FeatureFormatError(f"Invalid descriptor parameters in '{token}': {e}") from e


@dataclass(frozen=True)
class FeatureSpec:
    """A descriptor together with the colour space it is computed in."""
    descriptor: DescriptorId
    colorspace: str = "hsv"

    def __post_init__(self) -> None:
        if self.colorspace not in FEATURE_COLORSPACES:
            raise ConfigError(f"Unknown feature colour space '{self.colorspace}' (use rgb or hsv)")

    def token(self) -> str:
        kind, _, params = self.descriptor.token().partition(":")
        return f"{kind}/{self.colorspace}:{params}"

    @classmethod
    def parse(cls, token: str) -> "FeatureSpec":
        head, sep, params = token.partition(":")
        kind, slash, colorspace = head.partition("/")
        if not slash:
            raise FeatureFormatError(f"Feature spec '{token}' has no colour space")
        return cls(DescriptorId.parse(f"{kind}{sep}{params}"), colorspace.strip().lower())


@dataclass(frozen=True, eq=False)
class FeatureVector:
    descriptor: DescriptorId
    values: np.ndarray
    blocks: Tuple[int, ...]

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != sum(self.blocks):
            raise DimensionMismatchError(f"Feature of length {values.shape} does not match blocks {self.blocks}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.descriptor == other.descriptor and self.blocks == other.blocks
                and np.array_equal(self.values, other.values))


def _check_mask(mask: Optional[np.ndarray], shape: Tuple[int, int]) -> Optional[np.ndarray]:
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise DimensionMismatchError(f"Mask {mask.shape} does not match image {shape}")
    return mask


def _normalized(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    return counts / total if total > 0 else counts.astype(np.float64)


def _require_three_channels(img: RasterImage) -> None:
    if img.colorspace.channels != 3:
        raise WrongColorSpaceError(f"Descriptor needs a 3-channel image, got {img.colorspace.name}")


def _quantize(data: np.ndarray, colorspace: ColorSpace, levels: int) -> np.ndarray:
    """Uniform per-channel quantization into levels steps over each channel's range."""
    out = np.empty(data.shape, dtype=np.int64)
    for c, (lo, hi) in enumerate(CHANNEL_RANGES[colorspace]):
        scaled = np.floor((data[..., c].astype(np.float64) - lo) / (hi - lo) * levels)
        out[..., c] = np.clip(scaled, 0, levels - 1)
    return out


# ---------------------------------------------------------------------------
# Global Color Histogram
# ---------------------------------------------------------------------------

def gch(img: RasterImage, bins_per_channel: int = DEFAULT_GCH_BINS,
        mask: Optional[np.ndarray] = None) -> FeatureVector:
    """Joint histogram of uniformly quantized colours over the masked pixels."""
    descriptor = DescriptorId(DescriptorKind.GCH, bins=bins_per_channel)
    _require_three_channels(img)
    mask = _check_mask(mask, img.shape)
    q = _quantize(img.data, img.colorspace, bins_per_channel)
    cells = (q[..., 0] * bins_per_channel + q[..., 1]) * bins_per_channel + q[..., 2]
    selected = cells[mask] if mask is not None else cells.ravel()
    if selected.size == 0:
        raise EmptyMaskError("GCH mask selects no pixels")
    counts = np.bincount(selected, minlength=bins_per_channel ** 3).astype(np.float64)
    return FeatureVector(descriptor, counts / selected.size, descriptor.block_sizes())


# ---------------------------------------------------------------------------
# Color Coherence Vector
# ---------------------------------------------------------------------------

def _levels_for(n_colors: int) -> int:
    levels = 1
    while levels ** 3 < n_colors:
        levels += 1
    return levels


def quantize_colors(img: RasterImage, n_colors: int) -> np.ndarray:
    """
    Maps every pixel onto one of n_colors buckets.

    Each channel is uniformly quantized into c = ceil(cbrt(n_colors)) levels;
    the c**3 joint cells are folded onto n_colors buckets by cell * n // c**3,
    which is the identity when n_colors is a perfect cube.
    """
    _require_three_channels(img)
    return _color_buckets(img.data, img.colorspace, n_colors)


def _color_buckets(data: np.ndarray, colorspace: ColorSpace, n_colors: int) -> np.ndarray:
    levels = _levels_for(n_colors)
    q = _quantize(data, colorspace, levels)
    cells = (q[..., 0] * levels + q[..., 1]) * levels + q[..., 2]
    return cells * n_colors // levels ** 3


def coherence_histograms(buckets: np.ndarray, n_colors: int, tau: Optional[int] = None,
                         mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Coherent histogram followed by incoherent histogram, normalized to total sum 1.

    A pixel is coherent when its 8-connected same-bucket component (restricted
    to the mask) holds at least tau pixels.
    """
    cv2 = lazy_importer.get_cv2()
    buckets = np.asarray(buckets)
    mask = _check_mask(mask, buckets.shape)
    counted = np.ones(buckets.shape, dtype=bool) if mask is None else mask
    total = int(counted.sum())
    if total == 0:
        raise EmptyMaskError("CCV mask selects no pixels")
    if tau is None:
        tau = max(1, math.ceil(DEFAULT_CCV_TAU_FRACTION * total))

    coherent = np.zeros(n_colors, dtype=np.float64)
    incoherent = np.zeros(n_colors, dtype=np.float64)
    for bucket in np.unique(buckets[counted]):
        region = ((buckets == bucket) & counted).astype(np.uint8)
        n_labels, _, stats, _ = cv2.connectedComponentsWithStats(region, connectivity=8)
        areas = stats[1:n_labels, cv2.CC_STAT_AREA]
        coherent[bucket] = areas[areas >= tau].sum()
        incoherent[bucket] = areas[areas < tau].sum()
    return np.concatenate([coherent, incoherent]) / total


def ccv(img: RasterImage, n_colors: int = DEFAULT_CCV_COLORS, tau: Optional[int] = None,
        mask: Optional[np.ndarray] = None, blur: bool = True) -> FeatureVector:
    """Blur (3x3 mean), quantize, label connected components and split by coherence."""
    descriptor = DescriptorId(DescriptorKind.CCV, n_colors=n_colors, tau=tau, blur=blur)
    _require_three_channels(img)
    mask = _check_mask(mask, img.shape)
    data = np.array(img.data, dtype=np.float64)
    if blur:
        cv2 = lazy_importer.get_cv2()
        data = cv2.blur(data, (3, 3), borderType=cv2.BORDER_REPLICATE)
    # The blurred values stay real-valued, even for RGB8 input.
    buckets = _color_buckets(data, img.colorspace, n_colors)
    values = coherence_histograms(buckets, n_colors, tau, mask)
    return FeatureVector(descriptor, values, descriptor.block_sizes())


# ---------------------------------------------------------------------------
# Local Binary Patterns
# ---------------------------------------------------------------------------

def _snap(value: float) -> float:
    nearest = round(value)
    return float(nearest) if abs(value - nearest) < _GRID_SNAP else value


def neighbor_offsets(p: LbpParams) -> List[Tuple[float, float]]:
    """(row, column) offset of each of the N circular neighbours."""
    offsets = []
    for n in range(p.neighbors):
        angle = 2.0 * math.pi * n / p.neighbors
        offsets.append((_snap(-p.radius * math.sin(angle)), _snap(p.radius * math.cos(angle))))
    return offsets


def bilinear_sample(values: np.ndarray, row: float, col: float) -> float:
    """Bilinear interpolation; returns the grid value itself at integer coordinates."""
    r0, c0 = math.floor(row), math.floor(col)
    tr, tc = row - r0, col - c0
    r1 = r0 + 1 if tr > 0 else r0
    c1 = c0 + 1 if tc > 0 else c0
    p00, p01 = float(values[r0, c0]), float(values[r0, c1])
    p10, p11 = float(values[r1, c0]), float(values[r1, c1])
    top = p00 + tc * (p01 - p00)
    bottom = p10 + tc * (p11 - p10)
    return top + tr * (bottom - top)


def lbp_code(plane: ChannelPlane, i: int, j: int, p: LbpParams) -> int:
    """LBP code of the pixel at row i, column j."""
    r = p.radius
    if not (r <= i < plane.height - r and r <= j < plane.width - r):
        raise OutOfBoundsError(f"Pixel ({i}, {j}) is closer than {r} pixels to the border")
    center = float(plane.values[i, j])
    code = 0
    for n, (dr, dc) in enumerate(neighbor_offsets(p)):
        if bilinear_sample(plane.values, i + dr, j + dc) - center >= 0:
            code |= 1 << n
    return code


def _support_kernel(p: LbpParams) -> np.ndarray:
    """Grid pixels touched by the centre and its interpolated neighbours."""
    size = 2 * p.radius + 1
    kernel = np.zeros((size, size), dtype=np.uint8)
    kernel[p.radius, p.radius] = 1
    for dr, dc in neighbor_offsets(p):
        for rr in {math.floor(dr), math.ceil(dr)}:
            for cc in {math.floor(dc), math.ceil(dc)}:
                kernel[p.radius + rr, p.radius + cc] = 1
    return kernel


def _neighbor_samples(values: np.ndarray, p: LbpParams) -> Tuple[np.ndarray, np.ndarray]:
    """Centres of all interior pixels and their (N, ...) interpolated neighbours."""
    r = p.radius
    h, w = values.shape
    hh, ww = h - 2 * r, w - 2 * r

    def shifted(dr: int, dc: int) -> np.ndarray:
        return values[r + dr:r + dr + hh, r + dc:r + dc + ww]

    center = shifted(0, 0)
    samples = np.empty((p.neighbors, hh, ww), dtype=np.float64)
    for n, (dr, dc) in enumerate(neighbor_offsets(p)):
        r0, c0 = math.floor(dr), math.floor(dc)
        tr, tc = dr - r0, dc - c0
        r1 = r0 + 1 if tr > 0 else r0
        c1 = c0 + 1 if tc > 0 else c0
        p00, p01 = shifted(r0, c0), shifted(r0, c1)
        p10, p11 = shifted(r1, c0), shifted(r1, c1)
        top = p00 + tc * (p01 - p00)
        bottom = p10 + tc * (p11 - p10)
        samples[n] = top + tr * (bottom - top)
    return center, samples


def _valid_centers(shape: Tuple[int, int], p: LbpParams, mask: Optional[np.ndarray]) -> np.ndarray:
    r = p.radius
    h, w = shape
    if mask is None:
        return np.ones((h - 2 * r, w - 2 * r), dtype=bool)
    cv2 = lazy_importer.get_cv2()
    eroded = cv2.erode(mask.astype(np.uint8), _support_kernel(p),
                       borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return eroded[r:h - r, r:w - r].astype(bool)


def _pack_codes(bits: np.ndarray) -> np.ndarray:
    weights = (1 << np.arange(bits.shape[0], dtype=np.int64)).reshape(-1, 1, 1)
    return (bits.astype(np.int64) * weights).sum(axis=0)


def _prepare(plane: ChannelPlane, p: LbpParams, mask: Optional[np.ndarray]):
    mask = _check_mask(mask, (plane.height, plane.width))
    size = 2 * p.radius + 1
    if plane.height < size or plane.width < size:
        raise NoValidPixelsError(f"Plane {plane.width}x{plane.height} is smaller than the {size}x{size} neighbourhood")
    valid = _valid_centers((plane.height, plane.width), p, mask)
    if not valid.any():
        raise NoValidPixelsError("No pixel has its whole neighbourhood inside the mask")
    center, samples = _neighbor_samples(plane.values, p)
    return mask, valid, center, samples


def lbp_codes(plane: ChannelPlane, p: LbpParams) -> np.ndarray:
    """LBP code image over the interior pixels (border of width R excluded)."""
    _, _, center, samples = _prepare(plane, p, None)
    return _pack_codes(samples - center >= 0)


def lbp_histogram(plane: ChannelPlane, p: LbpParams = LbpParams(),
                  mask: Optional[np.ndarray] = None) -> FeatureVector:
    """Normalized histogram of LBP codes over the valid pixels."""
    descriptor = DescriptorId(DescriptorKind.LBP, lbp=p)
    _, valid, center, samples = _prepare(plane, p, mask)
    codes = _pack_codes(samples - center >= 0)[valid]
    counts = np.bincount(codes, minlength=p.n_codes).astype(np.float64)
    return FeatureVector(descriptor, counts / codes.size, descriptor.block_sizes(channels=1))


def _plane_mean(values: np.ndarray) -> float:
    # Shifted mean: exact for constant inputs.
    ref = values.flat[0]
    return float(ref + (values - ref).mean())


def clbp_codes(plane: ChannelPlane, p: LbpParams = LbpParams(), mask: Optional[np.ndarray] = None,
               threshold: str = "magnitude") -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    CLBP_S, CLBP_M and CLBP_C code images over the interior, plus the valid-pixel map.

    CLBP_M thresholds the magnitudes |v_n - v_c| at c, the mean magnitude over
    all valid pixels and neighbours ("magnitude") or the plane's mean gray
    level ("gray"). CLBP_C compares the centre with the mean gray level of the
    plane (inside the mask, when one is given).
    """
    if threshold not in CLBP_THRESHOLDS:
        raise ConfigError(f"Unknown CLBP threshold '{threshold}'")
    mask, valid, center, samples = _prepare(plane, p, mask)
    diff = samples - center
    magnitude = np.abs(diff)
    gray = plane.values[mask] if mask is not None else plane.values
    gray_mean = _plane_mean(gray)
    c = float(magnitude[:, valid].mean()) if threshold == "magnitude" else gray_mean
    s_codes = _pack_codes(diff >= 0)
    m_codes = _pack_codes(magnitude >= c)
    c_codes = (center >= gray_mean).astype(np.int64)
    return s_codes, m_codes, c_codes, valid


def clbp_histogram(plane: ChannelPlane, p: LbpParams = LbpParams(), mask: Optional[np.ndarray] = None,
                   threshold: str = "magnitude") -> FeatureVector:
    """hist(CLBP_S) + hist(CLBP_M) + hist(CLBP_C), each block normalized to sum 1."""
    descriptor = DescriptorId(DescriptorKind.CLBP, lbp=p, clbp_threshold=threshold)
    s_codes, m_codes, c_codes, valid = clbp_codes(plane, p, mask, threshold)
    count = float(valid.sum())
    blocks = [
        np.bincount(s_codes[valid], minlength=p.n_codes) / count,
        np.bincount(m_codes[valid], minlength=p.n_codes) / count,
        np.bincount(c_codes[valid], minlength=2) / count,
    ]
    return FeatureVector(descriptor, np.concatenate(blocks), descriptor.block_sizes(channels=1))


# ---------------------------------------------------------------------------
# Extraction front end
# ---------------------------------------------------------------------------

def _resolve_colorspace(colorspace: Union[str, ColorSpace]) -> ColorSpace:
    if isinstance(colorspace, ColorSpace):
        if colorspace not in FEATURE_COLORSPACES.values():
            raise ConfigError(f"Features are computed in RGB or HSV, not {colorspace.name}")
        return colorspace
    try:
        return FEATURE_COLORSPACES[colorspace.lower()]
    except KeyError as e:
        raise ConfigError(f"Unknown feature colour space '{colorspace}' (use rgb or hsv)") from e


def extract(img: RasterImage, descriptor: DescriptorId, colorspace: Union[str, ColorSpace] = "hsv",
            mask: Optional[np.ndarray] = None) -> FeatureVector:
    """
    Computes a descriptor of an RGB8 image in the requested colour space.

    GCH and CCV use the 3-channel image; LBP and CLBP run on each channel
    plane and concatenate the per-plane histograms. The mask restricts the
    counted pixels.
    """
    if img.colorspace is not ColorSpace.RGB8:
        raise WrongColorSpaceError(f"extract expects an RGB8 image, got {img.colorspace.name}")
    target = convert(img, _resolve_colorspace(colorspace))
    mask = _check_mask(mask, img.shape)
    if descriptor.kind is DescriptorKind.GCH:
        return gch(target, descriptor.bins, mask)
    if descriptor.kind is DescriptorKind.CCV:
        return ccv(target, descriptor.n_colors, descriptor.tau, mask, descriptor.blur)

    parts: List[np.ndarray] = []
    for plane in split_channels(target):
        if descriptor.kind is DescriptorKind.LBP:
            parts.append(lbp_histogram(plane, descriptor.lbp, mask).values)
        else:
            parts.append(clbp_histogram(plane, descriptor.lbp, mask, descriptor.clbp_threshold).values)
    logging.debug("Extracted %s from %dx%d image", descriptor.token(), img.width, img.height)
    return FeatureVector(descriptor, np.concatenate(parts), descriptor.block_sizes(target.colorspace.channels))


def stack_features(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """(n, length) matrix of feature values; every vector must share one descriptor."""
    if not vectors:
        return np.empty((0, 0))
    lengths = {v.length for v in vectors}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"Feature vectors differ in length: {sorted(lengths)}")
    return np.vstack([v.values for v in vectors])


def _extract_or_unmasked(img: RasterImage, spec: FeatureSpec,
                         mask: Optional[np.ndarray]) -> Tuple[FeatureVector, bool]:
    try:
        return extract(img, spec.descriptor, spec.colorspace, mask), False
    except (EmptyMaskError, NoValidPixelsError) as e:
        if mask is None:
            raise
        logging.debug("Mask unusable for %s (%s); extracting from the whole image", spec.token(), e)
        return extract(img, spec.descriptor, spec.colorspace, None), True


def extract_dataset(images: Sequence[RasterImage], spec: FeatureSpec,
                    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
                    threads: int = 1) -> List[FeatureVector]:
    """
    Extracts one feature vector per image, in input order.

    A mask too small to hold a single valid pixel (for instance a segmented
    lesion thinner than the LBP neighbourhood, or the speckled noise cluster
    of a healthy fruit) falls back to the whole image; one warning counts the
    fallbacks of the batch.
    """
    if masks is None:
        masks = [None] * len(images)
    if len(masks) != len(images):
        raise DimensionMismatchError(f"{len(masks)} masks for {len(images)} images")
    results = parallel_map(lambda pair: _extract_or_unmasked(pair[0], spec, pair[1]),
                           list(zip(images, masks)), threads)
    fallbacks = sum(1 for _, unmasked in results if unmasked)
    if fallbacks:
        logging.warning("%d of %d masks left no usable pixels for %s; used the whole image",
                        fallbacks, len(results), spec.token())
    return [vector for vector, _ in results]
