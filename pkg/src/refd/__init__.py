"""Regional efficiency rating engine: three-sigma point allocation, weighted
aggregation, support scores and star categories."""

__version__ = "0.1.0"
