"""One-shot extraction of interchange artifacts from vision models.

Given an image directory and a model recipe, dump the deepest
convolutional post-activation feature maps, the fully-connected weight
bundle where the architecture has one, reference penultimate embeddings,
post-softmax class probabilities, and resized input RGB tensors, plus a
plain-text manifest naming every artifact by role.  All tensors use the
NPY interchange format.
"""

from .extract import ExtractionError, WeightResolutionError, run_extraction
from .fixture import write_fixture
from .recipes import MODEL_NAMES, ExtractionRecipe, model_recipe

__all__ = [
    "ExtractionError",
    "ExtractionRecipe",
    "MODEL_NAMES",
    "WeightResolutionError",
    "model_recipe",
    "run_extraction",
    "write_fixture",
]

__version__ = "0.1.0"
