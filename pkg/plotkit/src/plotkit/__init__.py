"""Plotting companion for simulation results files: parse, then draw
error-rate-versus-parameter curves with confidence error bars."""

from .plot import main, plot_ber, uncoded_bpsk_theory
from .results import ResultsTable, load_results

__all__ = ["ResultsTable", "load_results", "plot_ber", "uncoded_bpsk_theory", "main"]

__version__ = "0.1.0"
