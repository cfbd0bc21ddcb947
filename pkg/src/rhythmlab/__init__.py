"""Motion-stratified three-class heart rhythm classification lab."""

__version__ = "0.1.0"

from .sigproc import LABELS, LABEL_INDEX, SAMPLE_RATE_HZ, SEGMENT_LEN

__all__ = ["LABELS", "LABEL_INDEX", "SAMPLE_RATE_HZ", "SEGMENT_LEN", "__version__"]
