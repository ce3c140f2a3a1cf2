"""Discrete-event performance model of heterogeneous CPU/GPU flow-graph pipelines."""

__version__ = "0.1.0"
