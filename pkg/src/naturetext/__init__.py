"""Corpus analytics toolkit for corporate nature disclosure.

Covers the full desk-scale pipeline: document ingestion and sentence
segmentation, dimension-specific keyword scanning and balanced sampling,
LLM pre-label scoring, four-annotator labeling with agreement statistics,
a two-layer keyword baseline classifier, a cross-validation evaluation
harness, and earnings-call exposure aggregation.
"""

__version__ = "0.1.0"
