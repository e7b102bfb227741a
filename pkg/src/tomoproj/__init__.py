"""Network tomography from low-dimensional projections of the measurements.

Routing matrices, identifiability checks, Gaussian pseudo-likelihood
estimators with their asymptotic covariances, characteristic-function
mixture fits for link delays, and the simulation drivers built on them.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateDistributionError, InvalidSampleError,  # noqa: E402
                     MalformedTopologyError, NonIdentifiableDesignError,
                     SingularCovarianceError, TomographyError)
from .topology import (RoutingMatrix, build_router_routing, build_tree_routing,  # noqa: E402
                       four_leaf_tree, two_leaf_tree, validate_routing)
from .identifiability import ProjectionSet, check_identifiability  # noqa: E402
from .gaussian import (GaussianModel, asymptotic_cov_1d, asymptotic_cov_2d,  # noqa: E402
                       fisher_information, model_covariance, optimal_projections,
                       random_projections)
from .estimators import (SampleBlock, estimate_1d, estimate_2d, estimate_mle,  # noqa: E402
                         estimate_moment)
from .cf_gmm import MixtureLinkModel, fit_cf_gmm, mixture_cf, projection_cf  # noqa: E402
from .metrics import CdfCurve, mallows_distance, normalized_mallows  # noqa: E402
