"""Tactile dome localisation lab.

Equal-area chart of a spherical sensing cap, an analytic five-sensor
forward surrogate, Laplacian kernel ridge regression with cross-validated
hyperparameters, and evaluation against a taxel baseline.
"""
from .geometry import (
    ChartGrid,
    DomeSpec,
    GeometryError,
    PlacementParams,
    SensorConfig,
    SurfacePoint,
    build_case,
    make_test_locations,
    make_training_grid,
    map_ab_to_surface,
    reflect_ab,
    sensor_mirror_permutation,
)
from .kernels import BACKEND
from .krr import FittedModel, GridSearchReport, Hyperparams, fit, grid_search, kfold_cv, laplacian_kernel, predict
from .surrogate import Dataset, Sample, SurrogateParams, generate_dataset, simulate_readings, sweep_symmetry_line

__version__ = "0.1.0"
