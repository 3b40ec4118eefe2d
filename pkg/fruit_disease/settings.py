"""
Pipeline configuration: defaults, YAML persistence and command-line overrides.
"""
import hashlib
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from .constants import (
    CONFIG_SCHEMA_VERSION,
    DEFAULT_C,
    DEFAULT_CCV_COLORS,
    DEFAULT_COLORSPACES,
    DEFAULT_FEATURES,
    DEFAULT_GCH_BINS,
    DEFAULT_K,
    DEFAULT_LBP_NEIGHBORS,
    DEFAULT_LBP_RADIUS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_POLICY,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    DEFAULT_TRAIN_PER_CLASS,
    DEFAULT_TRIALS,
)
from .classify import DECODINGS
from .errors import ConfigError, FruitDiseaseError
from .features import CLBP_THRESHOLDS, FEATURE_COLORSPACES, DescriptorId, DescriptorKind, LbpParams
from .segmentation import ClusterSelectionPolicy, KMeansConfig, parse_policy


@dataclass(frozen=True)
class SegmentationSettings:
    enabled: bool = True
    k: int = DEFAULT_K
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    restarts: int = DEFAULT_RESTARTS
    policy: str = DEFAULT_POLICY

    def kmeans(self, seed: int = 0) -> KMeansConfig:
        return KMeansConfig(self.k, seed, self.max_iterations, self.tolerance, self.restarts)

    def selection(self) -> ClusterSelectionPolicy:
        return parse_policy(self.policy)


@dataclass(frozen=True)
class DescriptorSettings:
    gch_bins: int = DEFAULT_GCH_BINS
    ccv_colors: int = DEFAULT_CCV_COLORS
    ccv_tau: Optional[int] = None
    ccv_blur: bool = True
    lbp_neighbors: int = DEFAULT_LBP_NEIGHBORS
    lbp_radius: int = DEFAULT_LBP_RADIUS
    clbp_threshold: str = "magnitude"

    def descriptor(self, kind: Union[str, DescriptorKind]) -> DescriptorId:
        """The descriptor of the given kind with these parameters."""
        try:
            kind = DescriptorKind(kind) if isinstance(kind, str) else kind
        except ValueError as e:
            raise ConfigError(f"Unknown feature '{kind}' (use gch, ccv, lbp or clbp)") from e
        if kind is DescriptorKind.GCH:
            return DescriptorId(kind, bins=self.gch_bins)
        if kind is DescriptorKind.CCV:
            return DescriptorId(kind, n_colors=self.ccv_colors, tau=self.ccv_tau, blur=self.ccv_blur)
        lbp = LbpParams(self.lbp_neighbors, self.lbp_radius)
        if kind is DescriptorKind.LBP:
            return DescriptorId(kind, lbp=lbp)
        return DescriptorId(kind, lbp=lbp, clbp_threshold=self.clbp_threshold)


@dataclass(frozen=True)
class SvmSettings:
    C: float = DEFAULT_C
    decoding: str = "literal"


@dataclass(frozen=True)
class EvaluationSettings:
    features: Tuple[str, ...] = DEFAULT_FEATURES
    colorspaces: Tuple[str, ...] = DEFAULT_COLORSPACES
    train_per_class: Tuple[int, ...] = DEFAULT_TRAIN_PER_CLASS
    trials: int = DEFAULT_TRIALS


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = DEFAULT_SEED
    colorspace: str = "hsv"
    feature: str = "clbp"
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    descriptors: DescriptorSettings = field(default_factory=DescriptorSettings)
    svm: SvmSettings = field(default_factory=SvmSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)

    def to_dict(self) -> Dict[str, Any]:
        data = _plain(asdict(self))
        data["schema_version"] = CONFIG_SCHEMA_VERSION
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        data = dict(data)
        data.pop("schema_version", None)
        try:
            config = _build(cls, data, "")
        except FruitDiseaseError as e:
            raise ConfigError(str(e)) from e
        validate(config)
        return config


_NESTED = {
    "segmentation": SegmentationSettings,
    "descriptors": DescriptorSettings,
    "svm": SvmSettings,
    "evaluation": EvaluationSettings,
}


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _coerce(value: Any, default: Any, where: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list, got {value!r}")
        item_type = type(default[0]) if default else str
        try:
            return tuple(item_type(v) for v in value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from e
    if default is None:
        return None if value is None else int(value)
    try:
        return type(default)(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where} has an invalid value {value!r}") from e


def _build(cls, data: Dict[str, Any], prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{prefix or 'root'}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {', '.join(prefix + k for k in unknown)}")
    defaults = cls()
    values = {}
    for name, value in data.items():
        if name in _NESTED and cls is PipelineConfig:
            values[name] = _build(_NESTED[name], value or {}, f"{name}.")
        else:
            values[name] = _coerce(value, getattr(defaults, name), prefix + name)
    return replace(defaults, **values)


def validate(config: PipelineConfig) -> None:
    """Raises ConfigError unless every nested setting is usable."""
    if config.colorspace not in FEATURE_COLORSPACES:
        raise ConfigError(f"colorspace must be rgb or hsv, got '{config.colorspace}'")
    if config.svm.C <= 0:
        raise ConfigError(f"svm.C must be positive, got {config.svm.C}")
    if config.svm.decoding not in DECODINGS:
        raise ConfigError(f"svm.decoding must be one of {', '.join(DECODINGS)}")
    if config.descriptors.clbp_threshold not in CLBP_THRESHOLDS:
        raise ConfigError(f"descriptors.clbp_threshold must be one of {', '.join(CLBP_THRESHOLDS)}")
    ev = config.evaluation
    if ev.trials < 1:
        raise ConfigError(f"evaluation.trials must be at least 1, got {ev.trials}")
    if not ev.features or not ev.colorspaces or not ev.train_per_class:
        raise ConfigError("evaluation lists must not be empty")
    if any(m < 1 for m in ev.train_per_class):
        raise ConfigError("evaluation.train_per_class values must be at least 1")
    for cs in ev.colorspaces:
        if cs not in FEATURE_COLORSPACES:
            raise ConfigError(f"evaluation.colorspaces: unknown colour space '{cs}'")
    config.segmentation.kmeans()
    config.segmentation.selection()
    for kind in set(ev.features) | {config.feature}:
        config.descriptors.descriptor(kind)


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """
    Reads a YAML configuration file; no path means defaults.

    A file written for another schema version is ignored with a warning.
    """
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of settings")
    if data.get("schema_version", CONFIG_SCHEMA_VERSION) != CONFIG_SCHEMA_VERSION:
        logging.warning("Config schema mismatch in %s, loading defaults", path)
        return PipelineConfig()
    return PipelineConfig.from_dict(data)


def save_config(config: PipelineConfig, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=True)


def apply_overrides(config: PipelineConfig, overrides: Dict[str, Any]) -> PipelineConfig:
    """
    Applies dotted-key overrides such as {"seed": 7, "svm.C": 10.0}; None values are skipped.
    """
    data = config.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        target = data.get(section) if section else data
        if not isinstance(target, dict) or name not in target:
            raise ConfigError(f"Unknown configuration key '{key}'")
        target[name] = _plain(value)
    return PipelineConfig.from_dict(data)


def config_hash(config: PipelineConfig) -> str:
    """SHA-256 of the canonical YAML form, recorded in evaluation reports."""
    text = yaml.safe_dump(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
