"""ELM-based frame synchronization for burst-mode links with nonlinear amplifiers."""

__version__ = "0.1.0"
