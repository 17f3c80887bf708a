"""Weather-driven power-grid resilience: outage events, metrics and Bayesian models."""

__version__ = "0.1.0"
