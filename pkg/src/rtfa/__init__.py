"""Ramanujan periodicity transform and Ramanujan de-shape time-frequency analysis."""

__version__ = "0.1.0"

from .ramanujan import (
    PeriodDictionary, build_cp, build_cpn, build_dictionary, euler_totient, get_dictionary, ramanujan_sum,
)
from .solver import NotConverged, SolverOptions, SparseSolution, bpdn_solve, bpdn_solve_multi
from .rpt import PTResult, rpt, vrpt
from .tfr import TFRMatrix, Window, gaussian_window, spectrogram, stft
from .deshape import deshape_stft, istct, stct
from .rds import RDSConfig, RDSResult, rds, rds_decompose, vrds
from .io import DataError, emit_matrix, ingest_signal

__all__ = [
    "PeriodDictionary", "build_cp", "build_cpn", "build_dictionary", "euler_totient", "get_dictionary",
    "ramanujan_sum", "NotConverged", "SolverOptions", "SparseSolution", "bpdn_solve", "bpdn_solve_multi",
    "PTResult", "rpt", "vrpt", "TFRMatrix", "Window", "gaussian_window", "spectrogram", "stft",
    "deshape_stft", "istct", "stct", "RDSConfig", "RDSResult", "rds", "rds_decompose", "vrds",
    "DataError", "emit_matrix", "ingest_signal",
]
