"""trajpareto: trajectory tables -> behavioral metrics -> composite
objectives -> empirical Pareto frontier with headroom diagnostics.

Submodules
----------
ingest       table loading, coordinate transform, smoothing, kinematics
interaction  detection zones, affine spacing policy, leader/follower search
metrics      risk score + GPD tail, headway, delay + stability gain, jerk/decel
objectives   normalization, composite (S, E, I) scores, KNN imputation
frontier     Pareto set, GPR surface, headroom, convex-hull comparison
cli          staged command-line pipeline with manifests
"""

from trajpareto._kernels import BACKEND as kernel_backend
from trajpareto._kernels import HAVE_COMPILED as have_compiled_kernel

__version__ = "0.1.0"

__all__ = ["kernel_backend", "have_compiled_kernel", "__version__"]
