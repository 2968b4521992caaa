"""kpsim: pseudo-spectral simulation and analysis of KP-II line-soliton dynamics."""

__version__ = "0.1.0"
