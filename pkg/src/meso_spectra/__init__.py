"""meso_spectra: extreme eigenvalues of low-rank perturbed random matrices.

The package predicts where a rank-M perturbation of a large random matrix
sends its extreme eigenvalues (and how the matching eigenvectors project
onto the perturbation), detects those eigenvalues independently through a
small master-equation operator, and ships a seeded Monte Carlo harness that
confronts the predictions with sampled realizations.
"""

from .spectral_core import (
    InvalidPerturbationError,
    MesoSpectraError,
    Model,
    ModelError,
    ModelKind,
    NotSeparatedError,
    PerturbationSpec,
    Separation,
    Side,
    SpectralWindow,
    SpectrumModel,
    check_separation,
    norm_bound,
    target_index,
)
from .transforms import (
    Transform,
    TransformDomainError,
    empirical_quantiles,
    empirical_stieltjes_transform,
    empirical_t_transform,
    invert_stieltjes,
    invert_t_transform,
    marchenko_pastur_transform,
    mp_density,
    mp_edges,
    mp_quantiles,
    mp_t_transform,
    mp_t_transform_deriv,
    semicircle_density,
    semicircle_quantiles,
    semicircle_stieltjes,
    semicircle_stieltjes_deriv,
    semicircle_transform,
    stieltjes,
    stieltjes_deriv,
    t_transform,
    t_transform_deriv,
    transform_for,
)
from .ensembles import (
    EnsembleSample,
    EntryLaw,
    RngStream,
    eigensolve,
    perturb_additive,
    perturb_multiplicative,
    sample_conjugated,
    sample_ensemble,
    sample_haar_frame,
    sample_wigner,
    sample_wishart,
)
from .master_equation import (
    Coupling,
    MasterOperator,
    MissingRootError,
    OutlierRoot,
    counting_function,
    evaluate_d,
    locate_outliers,
)
from .predictor import (
    DEFAULT_DELTA,
    OutlierPrediction,
    predict,
    predict_location,
    predict_projection_norm,
    predict_whitened_norm,
    pushforward_map,
    pushforward_sample,
)

__version__ = "0.1.0"

__all__ = [
    "Coupling",
    "DEFAULT_DELTA",
    "EnsembleSample",
    "EntryLaw",
    "InvalidPerturbationError",
    "MasterOperator",
    "MesoSpectraError",
    "MissingRootError",
    "Model",
    "ModelError",
    "ModelKind",
    "NotSeparatedError",
    "OutlierPrediction",
    "OutlierRoot",
    "PerturbationSpec",
    "RngStream",
    "Separation",
    "Side",
    "SpectralWindow",
    "SpectrumModel",
    "Transform",
    "TransformDomainError",
    "check_separation",
    "counting_function",
    "eigensolve",
    "empirical_quantiles",
    "empirical_stieltjes_transform",
    "empirical_t_transform",
    "evaluate_d",
    "invert_stieltjes",
    "invert_t_transform",
    "locate_outliers",
    "marchenko_pastur_transform",
    "mp_density",
    "mp_edges",
    "mp_quantiles",
    "mp_t_transform",
    "mp_t_transform_deriv",
    "norm_bound",
    "perturb_additive",
    "perturb_multiplicative",
    "predict",
    "predict_location",
    "predict_projection_norm",
    "predict_whitened_norm",
    "pushforward_map",
    "pushforward_sample",
    "sample_conjugated",
    "sample_ensemble",
    "sample_haar_frame",
    "sample_wigner",
    "sample_wishart",
    "semicircle_density",
    "semicircle_quantiles",
    "semicircle_stieltjes",
    "semicircle_stieltjes_deriv",
    "semicircle_transform",
    "stieltjes",
    "stieltjes_deriv",
    "t_transform",
    "t_transform_deriv",
    "target_index",
    "transform_for",
    "__version__",
]
