"""Momentum-jump phase-space Monte Carlo for fixed-energy quantum dynamics,
with an exact 1D grid oracle and a paraxial beam-propagation companion."""

__version__ = "0.1.0"

from .model import (PhasePoint, PotentialSpec, Units, double_well,
                    free_particle, gaussian_sum, harmonic)
from .pairdyn import JumpEvent, TrajectoryPair
from .microcanon import ShellEnsemble, ShellSample
from .jumpseries import SeriesConfig, WeightedOutcome
from .series import SpectrumSeries, TimeSeries
from .observables import ObservableSymbol
from .oracle import EigenSystem
from .waveprop import BeamMoments, BeamState, MediumProfile

__all__ = [
    "__version__", "PhasePoint", "PotentialSpec", "Units", "double_well",
    "free_particle", "gaussian_sum", "harmonic", "JumpEvent",
    "TrajectoryPair", "ShellEnsemble", "ShellSample", "SeriesConfig",
    "WeightedOutcome", "SpectrumSeries", "TimeSeries", "ObservableSymbol",
    "EigenSystem", "BeamMoments", "BeamState", "MediumProfile",
]
