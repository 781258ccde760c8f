"""Natural-language geographic question answering."""

__version__ = "0.1.0"
