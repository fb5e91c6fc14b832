"""Continuous latent-space network models on R^d and the Poincare half-plane."""

__version__ = "0.1.0"

from ._accel import get_backend, set_backend
from .alignment import align_configs, density_class_distance
from .density import GridSpec, density_eval, kde
from .embedding import EmbeddingResult, init_embedding, mle_embed
from .errors import (
    ClsError,
    DomainError,
    ExperimentFailure,
    LogZeroWarning,
    OptimizationError,
    SamplingError,
    SingularityError,
    UnboundedLogitError,
    UsageError,
)
from .geometry import (
    Configuration,
    GaussianEuclidean,
    HyperGaussian,
    Isometry,
    KdeEstimate,
    LatentSpace,
    apply_isometry,
    dist,
    dist_grad,
    random_isometry,
    sample_density,
)
from .likelihood import (
    EdgeProbMatrix,
    entropy_kl_decompose,
    expected_loglik_norm,
    loglik,
    loglik_norm,
    loglik_norm_grad,
)
from .links import (
    Graph,
    LinkFunction,
    generate_graph,
    generate_graph_iid,
    link_eval,
    link_logit,
    logit_bound,
)

__all__ = [
    "ClsError",
    "Configuration",
    "DomainError",
    "EdgeProbMatrix",
    "EmbeddingResult",
    "ExperimentFailure",
    "GaussianEuclidean",
    "Graph",
    "GridSpec",
    "HyperGaussian",
    "Isometry",
    "KdeEstimate",
    "LatentSpace",
    "LinkFunction",
    "LogZeroWarning",
    "OptimizationError",
    "SamplingError",
    "SingularityError",
    "UnboundedLogitError",
    "UsageError",
    "align_configs",
    "apply_isometry",
    "density_class_distance",
    "density_eval",
    "dist",
    "dist_grad",
    "entropy_kl_decompose",
    "expected_loglik_norm",
    "generate_graph",
    "generate_graph_iid",
    "get_backend",
    "init_embedding",
    "kde",
    "link_eval",
    "link_logit",
    "logit_bound",
    "loglik",
    "loglik_norm",
    "loglik_norm_grad",
    "mle_embed",
    "random_isometry",
    "sample_density",
    "set_backend",
]
