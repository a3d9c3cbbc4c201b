"""Interpretable graph classification via learned filtrations and
persistent homology."""

__version__ = "0.1.0"
