"""Predict where a rigid object slides to, and how far it turns, after an impulse."""

__version__ = "0.1.0"
