"""Simulation of a conventional entanglement witness, the time-shift attack
that fools it, and a measurement-device-independent witness that does not
fall for it."""

__version__ = "0.1.0"
