"""Physics-informed neural networks for two-qubit pulse design."""

__version__ = "0.1.0"
