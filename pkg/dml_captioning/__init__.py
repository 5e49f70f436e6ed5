"""Discrete Mode Learning captioning package"""

__version__ = "0.1.0"
