"""Quality scoring of fetal crown-rump length (CRL) ultrasound segmentations.

Given a label mask (0 background, 1 head, 2 body, 3 palate) and the matching
grayscale frame, crlqa measures the CRL landmarks, evaluates seven imaging
criteria, and compares AI scores against an expert's.
"""

__version__ = "0.1.0"

from .criteria import CriteriaConfig, ScoreCard, score_image  # noqa: E402
from .geometry import measure  # noqa: E402
from .mask_io import LabelMask, UltrasoundFrame, ImageMeta, load_case  # noqa: E402

__all__ = [
    "CriteriaConfig",
    "ImageMeta",
    "LabelMask",
    "ScoreCard",
    "UltrasoundFrame",
    "load_case",
    "measure",
    "score_image",
]
