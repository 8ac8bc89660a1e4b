"""Bayesian calibration, uncertainty propagation and sensitivity analysis."""

from .domain import (
    Beta,
    BoxDomain,
    Concatenated,
    Gamma,
    Gaussian,
    InverseGamma,
    LogNormal,
    PriorSpec,
    TargetDensity,
    Uniform,
    concatenate,
)
from .dram import DramOptions, DramResult, run_dram
from .errors import UQError
from .forward import QoiMap, propagate, random_walk_mc
from .gsa import analyze, build_design
from .multilevel import AmssaResult, LevelMhOptions, MlOptions, run_amssa
from .options import EnvSpec, OptionSet, parse_options, read_options, seed_for_worker
from .sequence import FilterSpec, SampleSequence

__version__ = "0.1.0"

__all__ = [
    "AmssaResult", "Beta", "BoxDomain", "Concatenated", "DramOptions", "DramResult", "EnvSpec",
    "FilterSpec", "Gamma", "Gaussian", "InverseGamma", "LevelMhOptions", "LogNormal", "MlOptions",
    "OptionSet", "PriorSpec", "QoiMap", "SampleSequence", "TargetDensity", "UQError", "Uniform",
    "analyze", "build_design", "concatenate", "parse_options", "propagate", "random_walk_mc",
    "read_options", "run_amssa", "run_dram", "seed_for_worker",
]
