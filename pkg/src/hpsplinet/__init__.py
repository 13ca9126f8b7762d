"""HP-spline regression with a ReLU network predicting the frequency parameter.

Modules
-------
hbasis     hyperbolic B-spline basis on uniform knots
hpfit      penalized least-squares fit and reconstruction metrics
net        ReLU multilayer perceptron, Adam training, Lipschitz estimates
wavelets   periodic Haar/db4 transforms and the V_J projector
datasets   parameter functions and signal generators
oracle     grid-search frequency baseline
stability  generalization-gap, stability and bound audits
harness    experiment drivers, CSV and SVG output
"""

from .hbasis import BasisConstructionError, HyperbolicBasis, UniformKnots, build_basis, design_matrix
from .hpfit import FitError, HpSpline, evaluate, fit, penalty_matrix, reconstruction_metrics
from .net import MlpNetwork, MlpSpec, TrainConfig, complexity, init, train
from .oracle import AlphaSearchConfig, optimal_alpha
from .wavelets import WaveletProjector, diameter, project

__version__ = "0.1.0"

__all__ = [
    "AlphaSearchConfig",
    "BasisConstructionError",
    "FitError",
    "HpSpline",
    "HyperbolicBasis",
    "MlpNetwork",
    "MlpSpec",
    "TrainConfig",
    "UniformKnots",
    "WaveletProjector",
    "build_basis",
    "complexity",
    "design_matrix",
    "diameter",
    "evaluate",
    "fit",
    "init",
    "optimal_alpha",
    "penalty_matrix",
    "project",
    "reconstruction_metrics",
    "train",
]
