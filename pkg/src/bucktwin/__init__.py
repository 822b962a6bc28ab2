"""bucktwin: data-driven digital twin pipeline for a DC-DC buck converter."""

__version__ = "0.1.0"
