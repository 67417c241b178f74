"""Neural side of the pipeline: tiny transformer encoders for the two-label
task and zero-shot NLI-style scoring.

This package never imports the search pipeline; the JSON-lines file schemas
are the only coupling between the two.
"""

__version__ = "0.1.0"
