"""corpusloop: closed-loop data engineering for domain corpora.

The engine compiles raw documents into a three-level knowledge structure
(reasoning chains, relational statements, concepts), derives an adversarial
benchmark and a traceable training corpus from that shared structure, scores
model predictions, diagnoses every failure, and assembles a targeted repair
corpus for the next training round.
"""

__version__ = "0.1.0"
