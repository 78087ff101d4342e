"""Bound-entanglement census of the bipartite-qutrit magic simplex."""

__version__ = "0.1.0"
