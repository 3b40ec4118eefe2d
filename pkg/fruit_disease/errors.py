"""
Error hierarchy for the fruit disease pipeline.
Every error carries the process exit code the CLI reports for it.
"""


class FruitDiseaseError(Exception):
    """Base class for all pipeline errors."""
    exit_code = 1


class ConfigError(FruitDiseaseError):
    exit_code = 2


# Image decoding and colour handling
class ImageNotFoundError(FruitDiseaseError):
    pass


class UnsupportedFormatError(FruitDiseaseError):
    pass


class CorruptImageError(FruitDiseaseError):
    pass


class WrongColorSpaceError(FruitDiseaseError):
    pass


class DimensionMismatchError(FruitDiseaseError):
    pass


# Segmentation
class TooFewPixelsError(FruitDiseaseError):
    pass


class EmptyClusterError(FruitDiseaseError):
    pass


# Features
class EmptyMaskError(FruitDiseaseError):
    pass


class NoValidPixelsError(FruitDiseaseError):
    pass


class OutOfBoundsError(FruitDiseaseError):
    pass


class FeatureFormatError(FruitDiseaseError):
    pass


# Classification
class EmptyClassError(FruitDiseaseError):
    pass


class MissingClassError(FruitDiseaseError):
    pass


class LengthMismatchError(FruitDiseaseError):
    pass


class ModelFormatError(FruitDiseaseError):
    pass


# Evaluation
class EmptyInputError(FruitDiseaseError):
    pass


class EmptyClassDirError(FruitDiseaseError):
    pass


class NoClassesError(FruitDiseaseError):
    pass


class InsufficientExamplesError(FruitDiseaseError):
    pass


class ReportFormatError(FruitDiseaseError):
    pass
