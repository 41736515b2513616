"""Identity testing for structured discrete distributions under the A_k distance."""

__version__ = "0.1.0"
