"""Approximate infinite-dimensional covariance descriptors for image sets.

Per-image covariance descriptors are embedded with a Nyström approximation
of a Log-Euclidean kernel on the SPD manifold; the covariance of those
embeddings describes the whole set.
"""
from .spd import EigenPair, SpdError, as_spd, as_sym, exp_sym, inv_sqrt_spd, log_spd, make_spd, sym_eig
from .metrics import (
    KernelKind,
    KernelSpec,
    airm_dist,
    gram,
    kernel_eval,
    lem_dist,
    loge_inner,
)
from .features import (
    FeatureKind,
    FeatureSpec,
    ImageSet,
    centering_matrix,
    covd_of_features,
    gabor_features,
    gradient_features,
    traditional_set_covd,
)
from .nystrom import NystromModel, nystrom_batch_embed, nystrom_embed, nystrom_fit
from .pipeline import Method, SetDescriptor, aid_covd, image_covds, traditional_covd
from .classifiers import (
    cdl_fit,
    cdl_predict,
    logvec,
    nn_classify,
    src_fit,
    src_predict,
)
from .evaluation import (
    METHODS,
    EvalReport,
    EvalSettings,
    Protocol,
    SyntheticSpec,
    emit_report,
    format_table,
    load_dataset,
    run_protocol,
    synth_dataset,
)

__version__ = "0.1.0"
