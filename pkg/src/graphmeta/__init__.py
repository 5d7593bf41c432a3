"""Dataset properties, sparse group lasso, DC-CSBM generation and separability checks for graph learning."""

from .graph import Graph, GraphFormatError, degree_vector, load_features, load_graph, load_labels
from .properties import PROPERTY_NAMES, PropertyVector, profile
from .msglasso import CoefficientMatrix, MetadataTable, regularization_path, salient_report, solve, standardize
from .generator import DcCsbmParams, WorldParams, calibrate_gini, sample_dc_csbm, sample_world
from .separability import (
    AlphaSubgroup,
    ConvolvedFeatures,
    alpha_subgroup,
    convolve,
    exact_separability,
    midpoint_hyperplane,
    separability_fraction,
)
from .experiment import ExperimentSpec, TrendResult, run_experiment, train_proxy_classifier

__version__ = "0.1.0"

__all__ = [
    "AlphaSubgroup",
    "CoefficientMatrix",
    "ConvolvedFeatures",
    "DcCsbmParams",
    "ExperimentSpec",
    "Graph",
    "GraphFormatError",
    "MetadataTable",
    "PROPERTY_NAMES",
    "PropertyVector",
    "TrendResult",
    "WorldParams",
    "alpha_subgroup",
    "calibrate_gini",
    "convolve",
    "degree_vector",
    "exact_separability",
    "load_features",
    "load_graph",
    "load_labels",
    "midpoint_hyperplane",
    "profile",
    "regularization_path",
    "run_experiment",
    "salient_report",
    "sample_dc_csbm",
    "sample_world",
    "separability_fraction",
    "solve",
    "standardize",
    "train_proxy_classifier",
]
