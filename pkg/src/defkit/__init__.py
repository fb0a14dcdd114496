"""Toolkit for manipulating instruction-learning task definitions.

Builds ablated and baseline definition variants from content annotations,
compresses definitions with a syntax-guided greedy search over constituency
parse trees, scores definitions against a generation backend with Rouge-L,
and emits structured triplet definitions plus meta-tuning instances.
"""

__version__ = "0.1.0"
