"""Two-stage edge-guided image inpainting in numpy: Canny edges, masks,
generator/discriminator forward passes, losses and evaluation metrics."""

from .edge_ops import CannyParams, canny, composite_edges, composite_image, mask_out, to_grayscale
from .errors import (
    DegenerateInputError,
    DegenerateInputWarning,
    InpaintError,
    ParameterError,
    ShapeError,
    WeightArchiveError,
    WeightMismatchError,
)
from .networks import build_discriminator, build_generator, forward, load_weights, save_weights

__version__ = "0.1.0"
