"""In-memory knowledge-graph engine: querying, validation, reasoning and learning."""

__version__ = "0.1.0"
