"""Kinetic traffic model lab: grid and particle solvers, pressureless Euler
references and hydrodynamic-limit metrics."""

__version__ = "0.1.0"
