"""Subject identification from hand-tremor recordings.

Pipeline: parse accelerometer/gyroscope recordings, isolate the tremor with a
weighted-frequency Fourier linear combiner, compute per-window time and
spectral features, and classify subjects with a random forest.
"""

__version__ = "0.1.0"

from .errors import TremorError
from .features import FEATURE_NAMES, extract_window
from .forest import Forest, ForestConfig, predict, train_forest
from .pipeline import PipelineConfig
from .signal_io import SensorRecording, parse_recording, read_recording
from .wflc import WflcParams, filter_signal

__all__ = [
    "FEATURE_NAMES", "Forest", "ForestConfig", "PipelineConfig", "SensorRecording",
    "TremorError", "WflcParams", "extract_window", "filter_signal", "parse_recording",
    "predict", "read_recording", "train_forest",
]
