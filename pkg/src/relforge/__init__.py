"""relforge: build graded-relevance test collections for semantic search
from an encoder ensemble plus an LLM judge, verify them with blinded human
annotation, and evaluate agreement, classification, and ranking quality."""

__version__ = "0.1.0"
