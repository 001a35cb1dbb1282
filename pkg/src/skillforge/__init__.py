"""Automated asset, task and reward generation with chained PPO skill learning."""

__version__ = "0.1.0"
