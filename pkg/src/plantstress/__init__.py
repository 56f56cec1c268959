"""Low-cost sensor analysis pipeline for early plant stress detection."""

__version__ = "0.1.0"
