"""Ontology learning from short, noisy technical verbatims."""

__version__ = "0.1.0"
