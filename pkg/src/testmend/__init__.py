"""Toolkit for repairing unit tests broken by method-signature changes.

The pipeline stages are: classify the signature change, collect repair
contexts from a two-version repository snapshot, rerank those contexts
against queries derived from the obsolete test, assemble a repair prompt,
obtain candidate repairs from a chat-completion provider, and score the
result.
"""

__version__ = "0.1.0"
