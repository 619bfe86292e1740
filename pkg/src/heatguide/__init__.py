"""Heat transfer through media with many small impedance particles, and heat waveguides
designed by a finite-rank Gel'fand-Levitan construction."""

__version__ = "0.1.0"
