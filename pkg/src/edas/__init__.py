"""Decentralized stochastic optimization with exact diffusion and adaptive stepsizes."""

from .algorithms import StepsizeSchedule, run
from .mixing import b_decomposition, beta_shift, choose_c, lazy_metropolis, spectral
from .topology import Graph, grid, ring

__version__ = "0.1.0"
