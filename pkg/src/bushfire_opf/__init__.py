"""Online power-flow planning under stochastically spreading bushfire."""

__version__ = "0.1.0"
