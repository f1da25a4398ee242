"""First-order-hold selective state space scans.

Discretization kernels (zero-order hold, exact first-order hold and two
truncated-series approximations), an input-selective scan with a chunked
parallel kernel and an analytic backward pass, a four-direction 2D cross-scan,
and a continuous-time oracle for measuring cumulative discretization error.
"""
from .core import Dims, Rng, Sequence, rng_new, sequence_new
from .discretization import (
    DiscreteFactors,
    Method,
    discretize,
    discretize_foh_exact,
    discretize_fssm,
    discretize_fssm_plus,
    discretize_zoh,
    phi1,
    phi2,
)
from .errors import (
    BadHeader,
    BadMagic,
    DegenerateFit,
    FSSMError,
    NonFinite,
    NonPositiveDelta,
    OutOfRange,
    ShapeMismatch,
)
from .scan import ScanElement, ScanGradients, ScanOutput, compose, scan_backward, scan_parallel, scan_sequential, selective_scan
from .scan2d import DIRECTIONS, Direction, DirectionSet, FeatureMap, cross_merge, cross_scan, rotate180, scan2d_forward
from .selection import SelectionWeights, StepParams, init_a, init_weights, load_weights, project_params, save_weights

__version__ = "0.1.0"

__all__ = [
    "BadHeader", "BadMagic", "DIRECTIONS", "DegenerateFit", "Dims", "Direction", "DirectionSet",
    "DiscreteFactors", "FSSMError", "FeatureMap", "Method", "NonFinite", "NonPositiveDelta",
    "OutOfRange", "Rng", "ScanElement", "ScanGradients", "ScanOutput", "SelectionWeights",
    "Sequence", "ShapeMismatch", "StepParams", "compose", "cross_merge", "cross_scan",
    "discretize", "discretize_foh_exact", "discretize_fssm", "discretize_fssm_plus",
    "discretize_zoh", "init_a", "init_weights", "load_weights", "phi1", "phi2",
    "project_params", "rng_new", "rotate180", "save_weights", "scan2d_forward",
    "scan_backward", "scan_parallel", "scan_sequential", "selective_scan", "sequence_new",
]
