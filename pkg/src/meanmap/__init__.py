"""Smooth similarity kernels between probabilistic models.

The generative mean map kernel (GMMK) compares two fitted models as the
expected RBF between their samples; closed forms are provided for discrete
distributions, Gaussians, mixtures, KDEs, linear dynamic systems, and HMMs.
The latent mean map kernel (LMMK) compares sequences through their posterior
clique distributions under one shared HMM. Supporting machinery covers HMM
estimation, Gram assembly, kernel SVM, kernel PCA, and cross-validation.
"""

from .distributions import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    KdeModel,
    LdsModel,
    sample,
    validate,
)
from .emmk import NgramProfile, emmk, emmk_continuous, ngram_profile
from .errors import DeadSequenceError, InvalidInputError, NumericalError
from .gmmk import (
    KernelValue,
    gmmk_discrete,
    gmmk_gaussian,
    gmmk_gaussian_isotropic,
    gmmk_kde,
    gmmk_lds,
    gmmk_mixture,
    ppk_gaussian,
)
from .gmmk_hmm import (
    GmmkHmmConfig,
    StateKernelMatrix,
    gmmk_hmm,
    ppk_hmm,
    ppk_hmm_discrete,
    state_kernels,
)
from .hmm import (
    FitResult,
    Hmm,
    HmmPosteriors,
    baum_welch,
    forward_backward,
    heuristic_state_count,
    hmm_sample,
    sequence_loglik,
    stationary_distribution,
    validate_hmm,
    viterbi,
)
from .kernels import OneOfKEncoding, RbfParams, rbf, rbf_symbols
from .learn import (
    CvReport,
    CvRow,
    GramMatrix,
    KpcaResult,
    SvmModel,
    assemble_gram,
    bayes_hmm_classify,
    check_psd,
    kpca,
    stratified_cv,
    stratified_folds,
    svm_decision,
    svm_predict,
    svm_train,
)
from .lmmk import (
    LmmkFeatures,
    TildeTransformConfig,
    lmmk,
    lmmk_features,
    tilde_transform,
    v_qq,
    v_xq_continuous,
    v_xq_discrete,
)
from .oracle import McEstimate, enum_hmm_kernel, enum_posteriors, mc_gmmk

__version__ = "0.1.0"

__all__ = [
    "DiscreteDist",
    "GaussianDist",
    "GaussianMixture",
    "KdeModel",
    "LdsModel",
    "sample",
    "validate",
    "NgramProfile",
    "emmk",
    "emmk_continuous",
    "ngram_profile",
    "DeadSequenceError",
    "InvalidInputError",
    "NumericalError",
    "KernelValue",
    "gmmk_discrete",
    "gmmk_gaussian",
    "gmmk_gaussian_isotropic",
    "gmmk_kde",
    "gmmk_lds",
    "gmmk_mixture",
    "ppk_gaussian",
    "GmmkHmmConfig",
    "StateKernelMatrix",
    "gmmk_hmm",
    "ppk_hmm",
    "ppk_hmm_discrete",
    "state_kernels",
    "FitResult",
    "Hmm",
    "HmmPosteriors",
    "baum_welch",
    "forward_backward",
    "heuristic_state_count",
    "hmm_sample",
    "sequence_loglik",
    "stationary_distribution",
    "validate_hmm",
    "viterbi",
    "OneOfKEncoding",
    "RbfParams",
    "rbf",
    "rbf_symbols",
    "CvReport",
    "CvRow",
    "GramMatrix",
    "KpcaResult",
    "SvmModel",
    "assemble_gram",
    "bayes_hmm_classify",
    "check_psd",
    "kpca",
    "stratified_cv",
    "stratified_folds",
    "svm_decision",
    "svm_predict",
    "svm_train",
    "LmmkFeatures",
    "TildeTransformConfig",
    "lmmk",
    "lmmk_features",
    "tilde_transform",
    "v_qq",
    "v_xq_continuous",
    "v_xq_discrete",
    "McEstimate",
    "enum_hmm_kernel",
    "enum_posteriors",
    "mc_gmmk",
]
