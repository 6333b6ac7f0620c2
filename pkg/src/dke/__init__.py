"""Distance kernel embeddings of finite metric measure spaces.

Submodules:

``mmspace``      finite metric measure spaces, validation, model-space samplers
``spectral``     the distance kernel operator and its eigendecomposition
``embedding``    the embedding into C^k, reconstruction error and bound evaluators
``persistence``  lower-star persistence, bottleneck distance, Betti/Euler curves
``transforms``   persistence and Euler kernel transforms over sampled directions
``cli``          the ``dke`` command
"""
__version__ = "0.1.0"

from .errors import DKEError, HypothesisViolation, MetricError, MultiplicityWarning, NumericFailure
from .mmspace import MetricMeasureSpace, make_mms, sample_lens, sample_sphere, sample_torus
from .spectral import Spectrum, eigendecompose
from .embedding import Embedding, embed, error_summary, hausdorff_L2

__all__ = [
    "__version__",
    "DKEError",
    "HypothesisViolation",
    "MetricError",
    "MultiplicityWarning",
    "NumericFailure",
    "MetricMeasureSpace",
    "make_mms",
    "sample_lens",
    "sample_sphere",
    "sample_torus",
    "Spectrum",
    "eigendecompose",
    "Embedding",
    "embed",
    "error_summary",
    "hausdorff_L2",
]
