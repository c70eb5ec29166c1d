"""Pipeline search and configuration: Bayesian optimization inside tabular Q-learning."""

__version__ = "0.1.0"
