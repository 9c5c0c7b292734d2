"""Model-inference sidecar producing representation shards for sociolect.

Consumes the canonical tokenized corpus, runs a pretrained bidirectional
masked language model, and writes the binary EmbeddingShard /
RepresentativeShard files the analysis pipeline reads.
"""

__version__ = "0.1.0"
