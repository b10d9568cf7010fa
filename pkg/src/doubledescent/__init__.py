"""Capacity sweeps for interpolating models: random features, kernel
machines, a Fourier model on the circle, tree ensembles and two-layer
networks, with minimum-norm solvers and a deterministic sweep harness."""

from .dataset_io import Dataset, PreprocessSpec, load_csv, load_mnist, preprocess
from .minnorm import solve_min_norm, solve_ridge
from .seeding import derive_seed
from .sweep import SweepConfig, SweepResult, compute_risks, run_sweep

__all__ = ["Dataset", "PreprocessSpec", "load_csv", "load_mnist", "preprocess", "solve_min_norm",
           "solve_ridge", "derive_seed", "SweepConfig", "SweepResult", "compute_risks", "run_sweep"]
__version__ = "0.1.0"
