"""Cone attention: hyperbolic entailment-cone similarity kernels for attention."""

from .attention import AttentionBatch, SimilarityMatrix, attend, multi_head, pairwise_logits, softmax_rows
from .errors import InconsistencyError, NumericRangeError
from .geometry import (
    HalfSpacePoint,
    HyperboloidPoint,
    exp_map,
    halfspace_distance,
    halfspace_to_hyperboloid,
    hyperboloid_distance,
    hyperboloid_to_halfspace,
    minkowski_inner,
    penumbral_member,
    umbral_member,
)
from .kernels import (
    KernelConfig,
    cone_logit,
    distance_logit,
    dot_logit,
    laplacian_logit,
    penumbral_exists,
    penumbral_height,
    umbral_height,
)
from .projections import einstein_midpoint, exp_origin_project, hyperboloid_to_klein, klein_to_hyperboloid, pseudopolar, psi, xi
from .tree import TreeSpec, generate_tree, read_tree, write_tree

__version__ = "0.1.0"
