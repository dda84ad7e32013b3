"""Spectra, eigenvalue ratios and bounds for compact metric graphs."""
from __future__ import annotations

from .graph import (
    DIRICHLET,
    KIRCHHOFF,
    Edge,
    GraphError,
    MetricGraph,
    Topology,
    Vertex,
    VertexCondition,
    contract_edge,
    graph_stats,
    insert_dummy,
    read_graph,
    split_at_vertex,
    suppress_dummies,
    write_graph,
)
from .families import make_family, parse_family
from .spectral import (
    Eigenfunction,
    Spectrum,
    SpectrumError,
    compute_spectrum,
    eigenfunction,
    eigenfunctions,
    eigenvalues,
    nodal_count,
    secular_matrix,
)

__version__ = "0.1.0"
