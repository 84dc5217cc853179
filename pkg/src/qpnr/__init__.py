"""Layout synthesis, scheduling, and control extraction for ion-trap circuits."""

__version__ = "0.1.0"
