"""Cross-script phonetic toponym embeddings.

A Teacher network trained on articulatory features grounds a shared
128-dimensional phonetic space; a character-level Student network is
distilled into it and deployed for retrieval without any phonetic
resources at inference time. The package covers the full path from
gazetteer curation through the three-phase curriculum to the similarity
index and evaluation harness.
"""

__version__ = "0.1.0"
