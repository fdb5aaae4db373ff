"""Multilinear subspace learning over stacked per-model feature vectors.

Build third-order feature tensors from per-model embedding vectors, learn
whitened per-mode bases and multilinear discriminant projections, and match
probes against a training gallery with cosine 1-NN.
"""

from .classify import EvalReport, Gallery, cosine, evaluate, predict, render_report
from .dataio import (
    AssembleInfo,
    ManifestRecord,
    SyntheticSpec,
    TrainedModel,
    assemble,
    load_model,
    read_feature,
    read_manifest,
    save_model,
    synth,
    write_feature,
    write_manifest,
)
from .eigen import EigenResult, energy_rank, solve_gen_eig, sym_eig, whiten_basis
from .errors import (
    FormatError,
    IngestionError,
    InvalidArgumentError,
    MslError,
    NumericalError,
)
from .msl import (
    LabeledSamples,
    MdaConfig,
    MdaFitReport,
    ModeBasis,
    hosvd_fit,
    howsvd_fit,
    howsvd_mda_fit,
    lda_fit,
    mda_fit,
    mode_spectra,
    project,
    project_all,
    scatter_matrices,
)
from .tensor import as_tensor, fold, mode_product, stack, unfold

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "as_tensor",
    "unfold",
    "fold",
    "mode_product",
    "stack",
    "EigenResult",
    "sym_eig",
    "energy_rank",
    "whiten_basis",
    "solve_gen_eig",
    "ModeBasis",
    "LabeledSamples",
    "MdaConfig",
    "MdaFitReport",
    "mode_spectra",
    "hosvd_fit",
    "howsvd_fit",
    "project",
    "project_all",
    "scatter_matrices",
    "mda_fit",
    "howsvd_mda_fit",
    "lda_fit",
    "Gallery",
    "EvalReport",
    "cosine",
    "predict",
    "evaluate",
    "render_report",
    "write_feature",
    "read_feature",
    "ManifestRecord",
    "write_manifest",
    "read_manifest",
    "AssembleInfo",
    "assemble",
    "SyntheticSpec",
    "synth",
    "TrainedModel",
    "save_model",
    "load_model",
    "MslError",
    "InvalidArgumentError",
    "NumericalError",
    "FormatError",
    "IngestionError",
]
