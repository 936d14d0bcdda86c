"""Functional 3D scene graph construction and evaluation toolkit.

Builds directed graphs of objects, interactive elements, and their
functional relationships from posed RGB-D sequences, driven by pluggable
detector / VLM / LLM backends, and scores predictions with open-vocabulary
Recall@K metrics.
"""

__version__ = "0.1.0"
