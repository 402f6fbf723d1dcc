"""Simulation and estimation toolkit for entanglement-enhanced phase estimation
with an NV electron spin and a nearby 13C nuclear spin."""

__version__ = "0.1.0"
