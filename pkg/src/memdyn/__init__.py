"""Open quantum system dynamics with memory: simulation and non-Markovianity diagnostics."""

__version__ = "0.1.0"
