"""Multi-label crisis-tweet classification with a corpus graph, graph attention and a relation head."""

__version__ = "0.1.0"
