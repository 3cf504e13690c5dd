"""Fine-tuning harness: trains compact transformer encoder classifiers per
fold and emits prediction files in the evaluation pipeline's adapter format.
"""

__version__ = "0.1.0"
