"""Row/column structure extraction for cropped table images.

Each axis has its own bi-directional recurrent labeler that marks every
pixel column (or row) as content or separator whitespace; separators are
the midpoints of interior whitespace runs. Segmentations are scored with
a correspondence-matrix evaluation.
"""

from .errors import InvalidInputError, NumericError
from .model import CONTENT, WHITESPACE, Axis, Cell, ModelConfig, ModelParams

__version__ = "0.1.0"

__all__ = ["Axis", "Cell", "CONTENT", "WHITESPACE", "ModelConfig", "ModelParams",
           "InvalidInputError", "NumericError"]
