"""Large-deviation rate functions and optimiser graphons for subgraph counts."""

__version__ = "0.1.0"
