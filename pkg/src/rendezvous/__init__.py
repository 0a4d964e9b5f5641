"""Symmetric rendezvous on the complete graph and on vertex-transitive graphs."""

__version__ = "0.1.0"
