"""Deformable Gabor-wavelet templates.

Learning (supervised shared sketch and EM variants for mirrored, rotated,
or non-aligned corpora) and detection (sum-max template matching) of sparse
wavelet templates of object shapes.
"""

from .detection import Detection, Sum2Map, detect, max1, sum1, sum2
from .em import (
    AlignState,
    FlipState,
    RotationState,
    em_flip,
    em_locate,
    em_rotate,
    mirror,
)
from .errors import (
    ActiveBasisError,
    ConfigurationError,
    DataError,
    DegenerateImageError,
    MarginError,
    SizeError,
)
from .gabor import Dictionary, GaborElement, GaborParams, correlation, make_gabor
from .images import (
    ImagePyramid,
    ResponseMaps,
    build_pyramid,
    compute_responses,
    load_gray,
    normalize_image,
    resample,
)
from .pursuit import (
    ActiveBasisTemplate,
    ActivitySet,
    DeformedTemplate,
    TemplateElement,
    WeightedImage,
    inhibit,
    matching_pursuit,
    retrieve_activity,
    shared_sketch,
)
from .stats import (
    ElementWeight,
    ReferenceModel,
    compute_tables,
    element_score,
    pool_reference,
    saturate,
    solve_lambda,
)
from .template_io import load_template, save_template

__version__ = "0.1.0"
