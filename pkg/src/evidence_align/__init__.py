"""Self-aligned evidence extraction: data pipeline, preference losses and QA metrics."""

__version__ = "0.1.0"
