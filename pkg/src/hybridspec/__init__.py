"""Spectroscopy models for a cavity coupled to a tunable microwave resonator and
a bank of mechanical resonators: closed-form scattering, coil tuning, a
lumped-element wirebond model and multi-cut GA fitting."""

__version__ = "0.1.0"
