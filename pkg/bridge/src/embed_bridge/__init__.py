"""embed-bridge: a minimal HTTP service for sentence embeddings."""

from .app import create_app
from .encoders import (
    DEFAULT_MODEL,
    Encoder,
    HashTrigramEncoder,
    SentenceTransformerEncoder,
    build_encoder,
)

__version__ = "0.1.0"
