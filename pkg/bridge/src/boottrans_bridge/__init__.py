"""Gradient-update service for exported training batches.

Consumes the line-delimited batch files written by the orchestrator,
recomputes the weighted clipped group objective against a neural policy's
current and reference log-probabilities, applies one optimizer step, and
serves the updated policy behind the same HTTP generation contract the
orchestrator's HTTP policy client speaks.
"""

__version__ = "0.1.0"
