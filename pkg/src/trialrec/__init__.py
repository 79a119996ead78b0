"""Clinical-trial design recommendation engine.

Builds a typed knowledge graph from trial records, trains text and graph
embeddings, and recommends design elements (endpoints, eligibility criteria)
for a new trial described only by its draft title.
"""

__version__ = "0.1.0"
