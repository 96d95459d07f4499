"""Dimer covers, wired spanning trees, winding height fields and SLE drivers
on piecewise-Temperleyan lattice domains."""

from .domains import (
    DimerGraph,
    MarkedDomain,
    WiredGraph,
    build_piecewise_temperleyan,
    build_superposition,
    derive_tree_graph,
    dimer_graph,
    load_domain,
    square_color,
)

__all__ = [
    "DimerGraph",
    "MarkedDomain",
    "WiredGraph",
    "build_piecewise_temperleyan",
    "build_superposition",
    "derive_tree_graph",
    "dimer_graph",
    "load_domain",
    "square_color",
]

__version__ = "0.1.0"
