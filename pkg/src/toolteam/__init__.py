"""Runtime for coordinating a heterogeneous team of model tool agents."""

__version__ = "0.1.0"
