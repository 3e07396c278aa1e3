"""Few-shot named-entity recognition with dispersedly trained entity-level
prototypes: span-based classification by squared-Euclidean similarity and a
Train/Adapt/Recognize protocol."""

from .corpus import Dataset, Entity, Sentence, Span, TypeSystem
from .embeddings import EmbeddingStore, hash_embed, read_embedding_file
from .trainer import AdaptConfig, Checkpoint, TrainConfig, adapt, recognize, train

__all__ = [
    "AdaptConfig",
    "Checkpoint",
    "Dataset",
    "EmbeddingStore",
    "Entity",
    "Sentence",
    "Span",
    "TrainConfig",
    "TypeSystem",
    "adapt",
    "hash_embed",
    "read_embedding_file",
    "recognize",
    "train",
]

__version__ = "0.1.0"
