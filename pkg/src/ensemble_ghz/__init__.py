"""Exact simulation of heralded GHZ-state preparation with atomic ensembles and linear optics."""

from .analyzer import (
    PatternClass,
    classify_pattern,
    enumerate_outcomes,
    ghz_analyzer_unitary,
    ghz_ket,
    project_N_basis,
    transfer_ensemble_to_photons,
)
from .fock import FockBasisState, Ket, ModeId, ZeroNormError, basis_ket, vacuum
from .optics import ClickPattern, DetectorModel, ModeUnitary, OutcomeBranch, apply_mode_unitary, measure_modes
from .protocol import ProtocolConfig, ProtocolReport, run, run_exact, run_montecarlo, sweep
from .source import SourceParams, pair_state, system_state

__version__ = "0.1.0"
