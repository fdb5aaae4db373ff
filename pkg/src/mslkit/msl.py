"""Multilinear subspace learning on stacked sample tensors.

The pipeline has two stages.  Stage 1 builds one basis per tensor mode from
the uncentered mode covariance C^(k) = sum_i X_i^(k) (X_i^(k))^T, either
truncated eigenvectors (``hosvd_fit``) or the same vectors scaled by
1/sqrt(eigenvalue) so that W^T C W is close to the identity (``howsvd_fit``).
Stage 2 (``mda_fit``) refines discriminative per-mode projections by
alternating generalized eigenproblems on between/within scatter matrices of
partially projected samples, starting from identity matrices.

Samples are order-N tensors; the sample index is always the implicit last
mode of the stacked tensor and is never projected.  Class labels are dense
integers 1..L.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenResult, energy_rank, solve_gen_eig, sym_eig, whiten_basis
from .errors import InvalidArgumentError, NumericalError
from .tensor import as_tensor, mode_product, stack, unfold

__all__ = [
    "STAGES",
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
]

STAGES = ("hosvd", "howsvd", "mda")
_SPECTRUM_FLOOR = 1e-10


@dataclass
class ModeBasis:
    """Per-mode projection matrices, each of shape (input_dim, output_dim)."""

    stage: str
    matrices: list[np.ndarray]

    def __post_init__(self):
        if self.stage not in STAGES:
            raise InvalidArgumentError(
                f"stage must be one of {STAGES}, got {self.stage!r}"
            )
        if not self.matrices:
            raise InvalidArgumentError("ModeBasis needs at least one mode matrix")
        mats = []
        for k, m in enumerate(self.matrices):
            m = np.ascontiguousarray(m, dtype=np.float64)
            if m.ndim != 2:
                raise InvalidArgumentError(f"mode-{k} matrix must be 2-D")
            if m.shape[1] > m.shape[0]:
                raise InvalidArgumentError(
                    f"mode-{k} matrix widens {m.shape[0]} -> {m.shape[1]}; "
                    "projections must not add dimensions"
                )
            if not np.all(np.isfinite(m)):
                raise InvalidArgumentError(f"mode-{k} matrix has non-finite entries")
            mats.append(m)
        self.matrices = mats

    @property
    def order(self) -> int:
        return len(self.matrices)

    @property
    def input_dims(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.matrices)

    @property
    def output_dims(self) -> tuple[int, ...]:
        return tuple(m.shape[1] for m in self.matrices)


@dataclass
class LabeledSamples:
    """Uniformly shaped order-N sample tensors with integer class labels."""

    samples: list[np.ndarray]
    labels: np.ndarray
    class_names: list[str] | None = None

    def __post_init__(self):
        self.samples = [as_tensor(s) for s in self.samples]
        if not self.samples:
            raise InvalidArgumentError("need at least one sample")
        shape = self.samples[0].shape
        for i, s in enumerate(self.samples):
            if s.shape != shape:
                raise InvalidArgumentError(
                    f"sample {i} has shape {s.shape}, expected {shape}"
                )
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != len(self.samples):
            raise InvalidArgumentError(
                f"need one label per sample, got {labels.shape[0]} labels "
                f"for {len(self.samples)} samples"
            )
        if np.any(labels < 1):
            raise InvalidArgumentError("labels must be integers >= 1")
        self.labels = labels
        if self.class_names is not None:
            if len(self.class_names) < int(labels.max()):
                raise InvalidArgumentError(
                    f"{len(self.class_names)} class names cannot cover "
                    f"label {int(labels.max())}"
                )
            self.class_names = [str(c) for c in self.class_names]

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples[0].shape

    @property
    def n_classes(self) -> int:
        return int(self.labels.max())

    @property
    def class_counts(self) -> np.ndarray:
        """Counts per label 1..L (index 0 corresponds to label 1)."""
        return np.bincount(self.labels, minlength=self.n_classes + 1)[1:]


@dataclass
class MdaConfig:
    """Knobs for the alternating discriminant fit.

    ``output_dims=None`` selects each mode's width from the generalized
    eigenvalue spectrum at the 96% energy point on the first pass.
    """

    output_dims: list[int] | None = None
    itr_max: int = 5
    epsilon: float = 1e-6
    gamma: float = 1e-6
    auto_energy: float = 0.96

    def validate(self, in_dims: tuple[int, ...]) -> None:
        if self.itr_max < 1:
            raise InvalidArgumentError(f"itr_max must be >= 1, got {self.itr_max}")
        if self.epsilon <= 0.0:
            raise InvalidArgumentError(f"epsilon must be > 0, got {self.epsilon}")
        if self.gamma < 0.0:
            raise InvalidArgumentError(f"gamma must be >= 0, got {self.gamma}")
        if not (0.0 < self.auto_energy <= 1.0):
            raise InvalidArgumentError(
                f"auto_energy must be in (0, 1], got {self.auto_energy}"
            )
        if self.output_dims is not None:
            if len(self.output_dims) != len(in_dims):
                raise InvalidArgumentError(
                    f"{len(self.output_dims)} output dims for "
                    f"{len(in_dims)} tensor modes"
                )
            for k, (o, i) in enumerate(zip(self.output_dims, in_dims)):
                if not (1 <= int(o) <= i):
                    raise InvalidArgumentError(
                        f"mode-{k} output dim {o} out of range 1..{i}"
                    )


@dataclass
class MdaFitReport:
    """Bookkeeping from one alternating fit.

    ``objective[i][k]`` is tr(W^T S_b W) / tr(W^T R W) for mode k after
    iteration i+1, with R the regularized within scatter of that solve (inf
    when the within scatter vanishes).  ``final_deltas[k]`` is
    ||W_itr - W_(itr-1)||_F from the last iteration that compared bases
    (None when only one iteration ran).
    """

    iterations: int
    converged: bool
    output_dims: list[int]
    input_dims: list[int]
    epsilon: float
    final_deltas: list[float] | None = None
    objective: list[list[float]] = field(default_factory=list)


def _clamp_spectrum(values: np.ndarray) -> np.ndarray:
    # Directions below 1e-10 of the top eigenvalue are treated as exact nulls
    # so rank selection cannot latch onto rounding noise.
    top = float(values[0]) if values.shape[0] else 0.0
    if top <= 0.0:
        return np.zeros_like(values)
    return np.where(values > _SPECTRUM_FLOOR * top, values, 0.0)


def mode_spectra(train: LabeledSamples, center: bool = False) -> list[EigenResult]:
    """Eigendecomposition of each mode covariance C^(k) of the training stack.

    With ``center=True`` the mean sample tensor is subtracted first; the
    default matches the uncentered Gram accumulation.
    """
    stacked = stack(train.samples)
    if center:
        stacked = stacked - stacked.mean(axis=-1, keepdims=True)
    spectra = []
    for k in range(stacked.ndim - 1):
        g = unfold(stacked, k)
        spectra.append(sym_eig(g @ g.T))
    return spectra


def _stage1_ranks(spectra: list[EigenResult], energy: float) -> list[int]:
    if not (0.0 < energy <= 1.0):
        raise InvalidArgumentError(f"energy must be in (0, 1], got {energy}")
    return [energy_rank(_clamp_spectrum(e.values), energy) for e in spectra]


def _require_two_samples(train: LabeledSamples) -> None:
    if train.n < 2:
        raise InvalidArgumentError(
            f"basis fitting needs at least 2 samples, got {train.n}"
        )


def hosvd_fit(
    train: LabeledSamples,
    energy: float = 0.96,
    center: bool = False,
    *,
    spectra: list[EigenResult] | None = None,
) -> ModeBasis:
    """Truncated per-mode eigenbases holding `energy` of each mode's spectrum.

    Pass precomputed ``spectra`` (from :func:`mode_spectra`) to skip the
    covariance eigendecompositions.
    """
    _require_two_samples(train)
    if spectra is None:
        spectra = mode_spectra(train, center)
    ranks = _stage1_ranks(spectra, energy)
    return ModeBasis(
        "hosvd", [e.vectors[:, :r].copy() for e, r in zip(spectra, ranks)]
    )


def howsvd_fit(
    train: LabeledSamples,
    energy: float = 0.96,
    center: bool = False,
    *,
    spectra: list[EigenResult] | None = None,
) -> ModeBasis:
    """Like :func:`hosvd_fit` but with whitened columns u_j / sqrt(lambda_j)."""
    _require_two_samples(train)
    if spectra is None:
        spectra = mode_spectra(train, center)
    ranks = _stage1_ranks(spectra, energy)
    return ModeBasis(
        "howsvd", [whiten_basis(e, r) for e, r in zip(spectra, ranks)]
    )


def project(x, basis: ModeBasis) -> np.ndarray:
    """Apply every mode matrix (transposed) of `basis` to one sample tensor."""
    t = as_tensor(x)
    if t.shape != basis.input_dims:
        raise InvalidArgumentError(
            f"sample shape {t.shape} does not match {basis.stage}-stage "
            f"input dims {basis.input_dims}"
        )
    for k, w in enumerate(basis.matrices):
        t = mode_product(t, k, w.T)
    return t


def project_all(samples: LabeledSamples, basis: ModeBasis) -> LabeledSamples:
    """Project every sample, keeping labels and class names."""
    return LabeledSamples(
        [project(s, basis) for s in samples.samples],
        samples.labels,
        samples.class_names,
    )


def _discriminant_eig(s_b, s_w, gamma: float) -> EigenResult:
    # A vanishing within scatter (identical samples per class, e.g. noiseless
    # synthetic data) makes the regularized pencil singular; the ratio is then
    # unbounded and the discriminant directions reduce to the between-scatter
    # principal axes.
    if float(np.trace(s_w)) == 0.0:
        return sym_eig(s_b)
    return solve_gen_eig(s_b, s_w, gamma)


def _trace_ratio(s_b, s_w, w, gamma: float) -> float:
    """Objective tr(W^T S_b W) / tr(W^T (S_w + gamma tr(S_w)/n I) W)."""
    n = s_w.shape[0]
    reg = s_w + (gamma * float(np.trace(s_w)) / n) * np.eye(n)
    num = float(np.trace(w.T @ s_b @ w))
    den = float(np.trace(w.T @ reg @ w))
    return num / den if den > 0.0 else float("inf")


def _require_dense_labels(samples: LabeledSamples) -> None:
    present = np.unique(samples.labels)
    expected = np.arange(1, samples.n_classes + 1)
    if present.shape[0] != expected.shape[0]:
        missing = sorted(set(expected.tolist()) - set(present.tolist()))
        raise InvalidArgumentError(
            f"labels must cover 1..{samples.n_classes}; missing {missing}"
        )


def scatter_matrices(
    samples: LabeledSamples, mode: int
) -> tuple[np.ndarray, np.ndarray]:
    """Between/within scatter of the mode-`mode` unfoldings.

    S_b = sum_c n_c D_c D_c^T with D_c the unfolding of (class mean - overall
    mean); S_w accumulates unfoldings of per-sample deviations from their
    class mean.  Classes are visited in ascending label order so repeat runs
    accumulate identically.
    """
    _require_dense_labels(samples)
    stacked = stack(samples.samples)
    if not (0 <= mode < stacked.ndim - 1):
        raise InvalidArgumentError(
            f"mode {mode} out of range for order-{stacked.ndim - 1} samples"
        )
    d = stacked.shape[mode]
    overall = stacked.mean(axis=-1)
    s_b = np.zeros((d, d))
    s_w = np.zeros((d, d))
    for c in range(1, samples.n_classes + 1):
        members = stacked[..., samples.labels == c]
        n_c = members.shape[-1]
        mu_c = members.mean(axis=-1)
        diff = np.moveaxis(mu_c - overall, mode, 0).reshape(d, -1)
        s_b += n_c * (diff @ diff.T)
        dev = members - mu_c[..., None]
        # Unfolding the deviation stack appends sample columns, so one Gram
        # equals the sum of per-sample Grams.
        g = np.moveaxis(dev, mode, 0).reshape(d, -1)
        s_w += g @ g.T
    return s_b, s_w


def mda_fit(
    samples: LabeledSamples, config: MdaConfig | None = None
) -> tuple[ModeBasis, MdaFitReport]:
    """Alternating per-mode discriminant fit (Gauss-Seidel over modes).

    Each pass projects every sample along all other modes' current bases,
    solves the generalized eigenproblem of the resulting scatters, and keeps
    the leading eigenvectors.  From the second pass on, the fit stops early
    when every mode satisfies ||W_itr - W_(itr-1)||_F < out_dim * in_dim *
    epsilon.  Returns the basis together with the iteration report.
    """
    config = config or MdaConfig()
    _require_dense_labels(samples)
    if samples.n_classes < 2:
        raise InvalidArgumentError(
            "discriminant fitting needs at least 2 classes, got 1"
        )
    in_dims = samples.shape
    order = len(in_dims)
    config.validate(in_dims)
    out_dims: list[int | None] = (
        [int(o) for o in config.output_dims]
        if config.output_dims is not None
        else [None] * order
    )
    ws = [np.eye(d) for d in in_dims]
    objective: list[list[float]] = []
    final_deltas: list[float] | None = None
    converged = False
    iterations = 0
    for itr in range(1, config.itr_max + 1):
        prev = [w.copy() for w in ws]
        obj_itr = []
        for k in range(order):
            partial = []
            for x in samples.samples:
                z = x
                for l in range(order):
                    if l != k:
                        z = mode_product(z, l, ws[l].T)
                partial.append(z)
            s_b, s_w = scatter_matrices(
                LabeledSamples(partial, samples.labels, samples.class_names), k
            )
            e = _discriminant_eig(s_b, s_w, config.gamma)
            if out_dims[k] is None:
                vals = _clamp_spectrum(np.maximum(e.values, 0.0))
                if float(vals.sum()) <= 0.0:
                    raise NumericalError(
                        f"mode {k} has no between-class energy; classes are "
                        "indistinguishable along this mode"
                    )
                out_dims[k] = energy_rank(vals, config.auto_energy)
            ws[k] = e.vectors[:, : out_dims[k]].copy()
            obj_itr.append(_trace_ratio(s_b, s_w, ws[k], config.gamma))
        objective.append(obj_itr)
        iterations = itr
        if itr >= 2:
            # Shapes match from the second pass on; the identity init cannot
            # be compared against the first truncated bases.
            final_deltas = [
                float(np.linalg.norm(ws[k] - prev[k])) for k in range(order)
            ]
            bounds = [
                out_dims[k] * in_dims[k] * config.epsilon for k in range(order)
            ]
            if all(d < b for d, b in zip(final_deltas, bounds)):
                converged = True
                break
    basis = ModeBasis("mda", ws)
    report = MdaFitReport(
        iterations=iterations,
        converged=converged,
        output_dims=[int(o) for o in out_dims],
        input_dims=list(in_dims),
        epsilon=config.epsilon,
        final_deltas=final_deltas,
        objective=objective,
    )
    return basis, report


def howsvd_mda_fit(
    train: LabeledSamples,
    energy: float = 0.96,
    config: MdaConfig | None = None,
) -> tuple[ModeBasis, ModeBasis, MdaFitReport]:
    """Whitened stage-1 basis, then the discriminant stage on projections."""
    stage1 = howsvd_fit(train, energy)
    stage2, report = mda_fit(project_all(train, stage1), config)
    return stage1, stage2, report


def lda_fit(
    samples: LabeledSamples, out_dim: int | None = None, gamma: float = 1e-6
) -> ModeBasis:
    """Classic discriminant reduction for order-1 samples.

    Uses the same scatter accumulation and generalized solver as the
    multilinear fit.  With ``out_dim=None`` the width is min(L - 1, number of
    eigenvalues above the relative floor).
    """
    _require_dense_labels(samples)
    if len(samples.shape) != 1:
        raise InvalidArgumentError(
            f"lda_fit expects order-1 samples, got order {len(samples.shape)}"
        )
    if samples.n_classes < 2:
        raise InvalidArgumentError(
            "discriminant fitting needs at least 2 classes, got 1"
        )
    s_b, s_w = scatter_matrices(samples, 0)
    e = _discriminant_eig(s_b, s_w, gamma)
    if out_dim is None:
        vals = _clamp_spectrum(np.maximum(e.values, 0.0))
        positive = int(np.count_nonzero(vals))
        if positive == 0:
            raise InvalidArgumentError(
                "class means coincide; no discriminative directions exist"
            )
        out_dim = min(samples.n_classes - 1, positive)
    if not (1 <= out_dim <= samples.shape[0]):
        raise InvalidArgumentError(
            f"out_dim {out_dim} out of range 1..{samples.shape[0]}"
        )
    return ModeBasis("mda", [e.vectors[:, :out_dim].copy()])
