import os

__version__ = "1.0.0"

# Image decoding
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
JPEG_SIGNATURE = b"\xff\xd8\xff"

# Segmentation defaults
DEFAULT_K = 4
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_TOLERANCE = 1e-4
DEFAULT_RESTARTS = 3
DEFAULT_POLICY = "outlier"

# Descriptor defaults
DEFAULT_GCH_BINS = 4
DEFAULT_CCV_COLORS = 64
DEFAULT_CCV_TAU_FRACTION = 0.01
DEFAULT_LBP_NEIGHBORS = 8
DEFAULT_LBP_RADIUS = 1

# SVM trainer
DEFAULT_C = 1.0
SVM_TOLERANCE = 1e-4
SVM_MAX_EPOCHS = 1000

# Evaluation sweep
DEFAULT_SEED = 42
DEFAULT_TRIALS = 5
DEFAULT_TRAIN_PER_CLASS = (10, 20, 30, 40, 50)
DEFAULT_FEATURES = ("gch", "ccv", "lbp", "clbp")
DEFAULT_COLORSPACES = ("rgb", "hsv")

# Synthetic generator classes, in the order of the disease descriptions
SYNTHETIC_CLASSES = ("apple_blotch", "apple_rot", "apple_scab", "normal")
DEFAULT_IMAGE_SIZE = 128
DEFAULT_PER_CLASS = 80
DEFAULT_NOISE = 6.0

MODEL_FORMAT_NAME = "fruit-disease-msvm"
MODEL_FORMAT_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

DEFAULT_THREADS = os.cpu_count() or 1
