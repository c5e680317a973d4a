"""Language-guided multi-source domain adaptation in embedding space."""

from ._kernels import BACKEND
from .embstore import DomainDataset, EmbeddingMatrix, PromptBank
from .losses import LossConfig
from .pipeline import AdaptedModel, TrainConfig
from .synth import WorldSpec

__version__ = "0.1.0"

__all__ = [
    "AdaptedModel",
    "BACKEND",
    "DomainDataset",
    "EmbeddingMatrix",
    "LossConfig",
    "PromptBank",
    "TrainConfig",
    "WorldSpec",
    "__version__",
]
