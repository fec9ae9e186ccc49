"""Simulation of SUO-KIF microworlds: parse ontology fragments, forward-chain
their rules, and run guarded transitions checked by conflict probes."""

__version__ = "0.1.0"
