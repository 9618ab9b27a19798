"""wardbench: clinical-reasoning dataset construction, rubric scoring,
weight-space merge filters, and annotation analytics."""

__version__ = "0.1.0"
