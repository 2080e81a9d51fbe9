"""
phononcounts: phonon-counting optomechanics toolkit

Simulates detector click streams from a thermally driven acoustic mode,
conditions them, computes 2nd-4th order coincidence histograms with exact
background correction, fits the physical models and extracts heralded
phonon-subtracted and phonon-added state statistics.
"""

__version__ = "1.0.0"
