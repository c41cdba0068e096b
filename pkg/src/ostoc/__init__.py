"""Online stochastic convex programming: primal-dual algorithms, learners and oracles."""

__version__ = "0.1.0"
