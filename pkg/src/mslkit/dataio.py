"""On-disk formats: feature files, dataset manifests, synthetic data, models.

Feature file layout (all integers little-endian)::

    offset 0   magic b"MSLF"
    offset 4   version u8 (currently 1)
    offset 5   dtype u8 (0 = float32, 1 = float64)
    offset 6   two zero pad bytes
    offset 8   order u32
    offset 12  dims, order x u64
    then       payload, IEEE little-endian, C order (last mode fastest)

Manifest CSV: header exactly ``sample_id,label,model,path``, UTF-8, LF line
endings, no quoting.  Paths resolve relative to the manifest's directory.

Trained models use a single-file container: magic b"MSLM", version byte,
a JSON metadata block, then raw float64/int64 array payloads in the order
the metadata lists them.  Serialization is byte-deterministic for equal
inputs, and predictions after a load round-trip are bit-exact.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .classify import Gallery
from .errors import FormatError, IngestionError, InvalidArgumentError
from .msl import LabeledSamples, MdaFitReport, ModeBasis
from .tensor import as_tensor

__all__ = [
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
]

_MAGIC_FEATURE = b"MSLF"
_MAGIC_MODEL = b"MSLM"
_FEATURE_VERSION = 1
_MODEL_VERSION = 1
_DTYPE_CODES = {"f32": 0, "f64": 1}
_DTYPE_NP = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_MANIFEST_HEADER = "sample_id,label,model,path"
_METHODS = ("howsvd-mda", "hosvd-mda", "lda", "raw")


# -- feature files -----------------------------------------------------------


def write_feature(path, tensor, dtype: str = "f64") -> None:
    """Serialize one tensor; `dtype` is "f64" (default) or "f32"."""
    if dtype not in _DTYPE_CODES:
        raise InvalidArgumentError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    t = as_tensor(tensor)
    code = _DTYPE_CODES[dtype]
    with np.errstate(over="ignore"):
        payload = np.ascontiguousarray(t, dtype=_DTYPE_NP[code])
    if not np.all(np.isfinite(payload)):
        raise InvalidArgumentError(
            "tensor does not fit in float32 without overflow"
        )
    header = _MAGIC_FEATURE + struct.pack(
        "<BBBBI", _FEATURE_VERSION, code, 0, 0, t.ndim
    )
    header += struct.pack(f"<{t.ndim}Q", *t.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_feature(path) -> np.ndarray:
    """Read a feature file back as a float64 tensor.

    Raises :class:`FormatError` naming the byte offset of the first problem.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != _MAGIC_FEATURE:
        raise FormatError(f"{path}: bad magic at offset 0")
    if len(blob) < 12:
        raise FormatError(f"{path}: header truncated at offset {len(blob)}")
    version, code, pad0, pad1, order = struct.unpack_from("<BBBBI", blob, 4)
    if version != _FEATURE_VERSION:
        raise FormatError(
            f"{path}: unsupported version {version} at offset 4 "
            f"(expected {_FEATURE_VERSION})"
        )
    if code not in _DTYPE_NP:
        raise FormatError(f"{path}: unknown dtype code {code} at offset 5")
    if pad0 != 0 or pad1 != 0:
        raise FormatError(f"{path}: non-zero pad bytes at offset 6")
    if order < 1 or order > 8:
        raise FormatError(f"{path}: order {order} out of range 1..8 at offset 8")
    dims_end = 12 + 8 * order
    if len(blob) < dims_end:
        raise FormatError(f"{path}: dims truncated at offset {len(blob)}")
    dims = struct.unpack_from(f"<{order}Q", blob, 12)
    for k, d in enumerate(dims):
        if d < 1:
            raise FormatError(
                f"{path}: dim {k} is zero at offset {12 + 8 * k}"
            )
    dtype = _DTYPE_NP[code]
    count = math.prod(dims)
    expected = dims_end + count * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload has {len(blob) - dims_end} bytes at offset "
            f"{dims_end}, expected {expected - dims_end}"
        )
    flat = np.frombuffer(blob, dtype=dtype, offset=dims_end)
    bad = np.nonzero(~np.isfinite(flat))[0]
    if bad.size:
        raise FormatError(
            f"{path}: non-finite value at offset "
            f"{dims_end + int(bad[0]) * dtype.itemsize}"
        )
    return flat.astype(np.float64).reshape(dims)


# -- manifests ---------------------------------------------------------------


@dataclass(frozen=True)
class ManifestRecord:
    """One manifest row: `label` is the class name, `path` a feature file."""

    sample_id: str
    label: str
    model: str
    path: str


def _check_field(value: str, name: str, line: int) -> str:
    if not value:
        raise IngestionError(f"manifest line {line}: empty {name}")
    if any(ch in value for ch in ',"\r\n'):
        raise IngestionError(
            f"manifest line {line}: {name} {value!r} contains a reserved character"
        )
    return value


def write_manifest(path, records) -> None:
    """Write records as the canonical CSV (LF endings, no quoting)."""
    lines = [_MANIFEST_HEADER]
    for i, r in enumerate(records, start=2):
        lines.append(
            ",".join(
                (
                    _check_field(r.sample_id, "sample_id", i),
                    _check_field(r.label, "label", i),
                    _check_field(r.model, "model", i),
                    _check_field(r.path, "path", i),
                )
            )
        )
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))


def read_manifest(path) -> list[ManifestRecord]:
    """Parse and validate a manifest CSV."""
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path}: manifest is not valid UTF-8") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != _MANIFEST_HEADER:
        raise IngestionError(
            f"{path}: first line must be '{_MANIFEST_HEADER}'"
        )
    records = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise IngestionError(
                f"{path}: line {i} has {len(parts)} fields, expected 4"
            )
        records.append(
            ManifestRecord(
                _check_field(parts[0], "sample_id", i),
                _check_field(parts[1], "label", i),
                _check_field(parts[2], "model", i),
                _check_field(parts[3], "path", i),
            )
        )
    if not records:
        raise IngestionError(f"{path}: manifest lists no samples")
    return records


# -- assembly ----------------------------------------------------------------


@dataclass
class AssembleInfo:
    """What :func:`assemble` built: column dims and any zero-padding applied."""

    models: list[str]
    model_dims: dict[str, int]
    dim: int
    padded_models: list[str] = field(default_factory=list)


def assemble(
    manifest_path, models=None, unit_norm: bool = False
) -> tuple[LabeledSamples, AssembleInfo]:
    """Fuse per-model feature vectors into (dim x n_models) sample tensors.

    `models` picks and orders the model columns (default: every model in the
    manifest, sorted by name).  Every sample must provide a vector for every
    selected model.  Model columns of different lengths are zero-padded to
    the longest; `unit_norm` rescales each vector to unit length first.
    Labels are assigned 1..L by sorted class-name order.
    """
    records = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    available = sorted({r.model for r in records})
    if models is None:
        models = available
    else:
        models = [str(m) for m in models]
        if not models:
            raise IngestionError("model selection is empty")
        if len(set(models)) != len(models):
            raise IngestionError(f"model selection repeats a name: {models}")
        for m in models:
            if m not in available:
                raise IngestionError(
                    f"model '{m}' not in manifest (available: {', '.join(available)})"
                )
    by_sample: dict[str, dict[str, ManifestRecord]] = {}
    label_of: dict[str, str] = {}
    for r in records:
        slot = by_sample.setdefault(r.sample_id, {})
        if r.model in slot:
            raise IngestionError(
                f"sample '{r.sample_id}' lists model '{r.model}' twice"
            )
        slot[r.model] = r
        if label_of.setdefault(r.sample_id, r.label) != r.label:
            raise IngestionError(
                f"sample '{r.sample_id}' has conflicting labels "
                f"'{label_of[r.sample_id]}' and '{r.label}'"
            )
    sample_ids = sorted(by_sample)
    for sid in sample_ids:
        for m in models:
            if m not in by_sample[sid]:
                raise IngestionError(f"sample '{sid}' is missing model '{m}'")
    class_names = sorted({label_of[sid] for sid in sample_ids})
    label_index = {name: i + 1 for i, name in enumerate(class_names)}

    model_dims: dict[str, int] = {}
    vectors: dict[str, dict[str, np.ndarray]] = {m: {} for m in models}
    for sid in sample_ids:
        for m in models:
            rec = by_sample[sid][m]
            vec = read_feature(os.path.join(base, rec.path))
            if vec.ndim != 1:
                raise IngestionError(
                    f"feature file for sample '{sid}' model '{m}' has order "
                    f"{vec.ndim}, expected a vector"
                )
            if m in model_dims:
                if vec.shape[0] != model_dims[m]:
                    raise IngestionError(
                        f"model '{m}' changes length at sample '{sid}': "
                        f"{vec.shape[0]} vs {model_dims[m]}"
                    )
            else:
                model_dims[m] = vec.shape[0]
            if unit_norm:
                norm = float(np.linalg.norm(vec))
                if norm == 0.0:
                    raise IngestionError(
                        f"sample '{sid}' model '{m}' is all-zero; cannot "
                        "normalize to unit length"
                    )
                vec = vec / norm
            vectors[m][sid] = vec

    dim = max(model_dims.values())
    padded = [m for m in models if model_dims[m] < dim]
    tensors = []
    labels = []
    for sid in sample_ids:
        cols = np.zeros((dim, len(models)))
        for j, m in enumerate(models):
            v = vectors[m][sid]
            cols[: v.shape[0], j] = v
        tensors.append(cols)
        labels.append(label_index[label_of[sid]])
    samples = LabeledSamples(tensors, np.array(labels), class_names)
    return samples, AssembleInfo(
        models=list(models), model_dims=model_dims, dim=dim, padded_models=padded
    )


# -- synthetic data ----------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Class-separated Gaussian tensors: unit mean directions scaled by
    `delta`, broadcast across `n_models` columns, plus sigma-scaled noise."""

    n_classes: int = 6
    per_class: int = 100
    dim: int = 64
    n_models: int = 3
    delta: float = 5.0
    sigma: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.n_classes < 1:
            raise InvalidArgumentError("n_classes must be >= 1")
        if self.per_class < 2:
            raise InvalidArgumentError(
                "per_class must be >= 2 so both splits are non-empty"
            )
        if self.dim < 1 or self.n_models < 1:
            raise InvalidArgumentError("dim and n_models must be >= 1")
        if self.delta < 0.0 or self.sigma < 0.0:
            raise InvalidArgumentError("delta and sigma must be >= 0")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be >= 0")


def synth(
    spec: SyntheticSpec, out_dir
) -> tuple[LabeledSamples, LabeledSamples, str, str]:
    """Generate, write, and reload a synthetic two-split dataset.

    Uses the counter-based Philox generator, so output is a pure function of
    `spec` (byte-identical across runs and platforms).  The first
    floor(0.8 * per_class) samples of each class form the train split.
    Returns (train, test, train_manifest_path, test_manifest_path).
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    directions = rng.standard_normal((spec.n_classes, spec.dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidArgumentError("degenerate zero mean direction drawn")
    directions /= norms

    out_dir = os.path.abspath(out_dir)
    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)
    n_train = int(math.floor(0.8 * spec.per_class))
    model_names = [f"model{m:02d}" for m in range(spec.n_models)]
    train_records: list[ManifestRecord] = []
    test_records: list[ManifestRecord] = []
    for c in range(spec.n_classes):
        class_name = f"class{c:02d}"
        mean = spec.delta * directions[c][:, None]
        noise = rng.standard_normal((spec.per_class, spec.dim, spec.n_models))
        for i in range(spec.per_class):
            x = mean + spec.sigma * noise[i]
            sample_id = f"{class_name}-{i:04d}"
            records = train_records if i < n_train else test_records
            for m, model in enumerate(model_names):
                rel = f"features/{sample_id}__{model}.mslf"
                write_feature(os.path.join(out_dir, rel), x[:, m])
                records.append(ManifestRecord(sample_id, class_name, model, rel))
    train_path = os.path.join(out_dir, "train.csv")
    test_path = os.path.join(out_dir, "test.csv")
    write_manifest(train_path, train_records)
    write_manifest(test_path, test_records)
    # Reload through the ingestion path so callers see exactly what training
    # on these manifests will see.
    train, _ = assemble(train_path)
    test, _ = assemble(test_path)
    return train, test, train_path, test_path


# -- trained models ----------------------------------------------------------


@dataclass
class TrainedModel:
    """Everything needed to evaluate: bases, gallery, and fit bookkeeping."""

    method: str
    models: list[str]
    class_names: list[str]
    feature_dims: list[int]
    energy: float
    unit_norm: bool
    center: bool
    gallery: Gallery
    stage1: ModeBasis | None = None
    stage2: ModeBasis | None = None
    mda_report: MdaFitReport | None = None
    spectra: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise InvalidArgumentError(
                f"method must be one of {_METHODS}, got {self.method!r}"
            )

    def project_sample(self, x) -> np.ndarray:
        """Flattened projection of one raw sample tensor under this model."""
        t = as_tensor(x)
        if self.method in ("howsvd-mda", "hosvd-mda"):
            from .msl import project

            return project(project(t, self.stage1), self.stage2).ravel()
        if t.shape != tuple(self.feature_dims):
            raise InvalidArgumentError(
                f"sample shape {t.shape} does not match model input dims "
                f"{tuple(self.feature_dims)}"
            )
        flat = t.ravel()
        if self.method == "lda":
            from .msl import project

            return project(flat, self.stage2).ravel()
        return flat


def _meta_basis(basis: ModeBasis | None, key: str, arrays: list) -> dict | None:
    if basis is None:
        return None
    names = []
    for k, m in enumerate(basis.matrices):
        name = f"{key}/{k}"
        arrays.append((name, m, "f8"))
        names.append(name)
    return {"stage": basis.stage, "arrays": names}


def save_model(path, model: TrainedModel) -> None:
    """Write the single-file model container (byte-deterministic)."""
    arrays: list[tuple[str, np.ndarray, str]] = []
    meta: dict = {
        "method": model.method,
        "models": model.models,
        "class_names": model.class_names,
        "feature_dims": [int(d) for d in model.feature_dims],
        "energy": float(model.energy),
        "unit_norm": bool(model.unit_norm),
        "center": bool(model.center),
        "stage1": _meta_basis(model.stage1, "stage1", arrays),
        "stage2": _meta_basis(model.stage2, "stage2", arrays),
    }
    arrays.append(("gallery/vectors", model.gallery.vectors, "f8"))
    arrays.append(("gallery/labels", model.gallery.labels, "i8"))
    meta["gallery"] = {
        "arrays": ["gallery/vectors", "gallery/labels"],
        "class_names": model.gallery.class_names,
    }
    if model.mda_report is not None:
        r = model.mda_report
        meta["mda_report"] = {
            "iterations": r.iterations,
            "converged": r.converged,
            "output_dims": r.output_dims,
            "input_dims": r.input_dims,
            "epsilon": r.epsilon,
            "final_deltas": r.final_deltas,
            "objective": r.objective,
        }
    else:
        meta["mda_report"] = None
    if model.spectra is not None:
        names = []
        for k, values in enumerate(model.spectra):
            name = f"spectrum/{k}"
            arrays.append((name, np.ascontiguousarray(values), "f8"))
            names.append(name)
        meta["spectra"] = names
    else:
        meta["spectra"] = None
    meta["arrays"] = [
        {"name": name, "shape": list(a.shape), "dtype": code}
        for name, a, code in arrays
    ]
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC_MODEL)
        fh.write(struct.pack("<BBBB", _MODEL_VERSION, 0, 0, 0))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a, code in arrays:
            dtype = np.dtype("<f8") if code == "f8" else np.dtype("<i8")
            fh.write(np.ascontiguousarray(a, dtype=dtype).tobytes())


def load_model(path) -> TrainedModel:
    """Read a model container back; inverse of :func:`save_model`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != _MAGIC_MODEL:
        raise FormatError(f"{path}: bad magic at offset 0")
    if len(blob) < 16:
        raise FormatError(f"{path}: header truncated at offset {len(blob)}")
    version = blob[4]
    if version != _MODEL_VERSION:
        raise FormatError(
            f"{path}: unsupported version {version} at offset 4 "
            f"(expected {_MODEL_VERSION})"
        )
    (meta_len,) = struct.unpack_from("<Q", blob, 8)
    if len(blob) < 16 + meta_len:
        raise FormatError(f"{path}: metadata truncated at offset {len(blob)}")
    try:
        meta = json.loads(blob[16 : 16 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: metadata is not valid JSON") from exc
    offset = 16 + meta_len
    loaded: dict[str, np.ndarray] = {}
    for entry in meta.get("arrays", []):
        shape = tuple(int(s) for s in entry["shape"])
        dtype = np.dtype("<f8") if entry["dtype"] == "f8" else np.dtype("<i8")
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * dtype.itemsize
        if len(blob) < offset + nbytes:
            raise FormatError(
                f"{path}: array '{entry['name']}' truncated at offset {offset}"
            )
        loaded[entry["name"]] = (
            np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    if offset != len(blob):
        raise FormatError(
            f"{path}: {len(blob) - offset} trailing bytes at offset {offset}"
        )

    def basis_from(key) -> ModeBasis | None:
        info = meta.get(key)
        if info is None:
            return None
        return ModeBasis(info["stage"], [loaded[n] for n in info["arrays"]])

    try:
        gallery_meta = meta["gallery"]
        gallery = Gallery(
            loaded[gallery_meta["arrays"][0]],
            loaded[gallery_meta["arrays"][1]],
            gallery_meta["class_names"],
        )
        report = None
        if meta.get("mda_report") is not None:
            r = meta["mda_report"]
            report = MdaFitReport(
                iterations=r["iterations"],
                converged=r["converged"],
                output_dims=r["output_dims"],
                input_dims=r["input_dims"],
                epsilon=r["epsilon"],
                final_deltas=r["final_deltas"],
                objective=r["objective"],
            )
        spectra = None
        if meta.get("spectra") is not None:
            spectra = [loaded[n] for n in meta["spectra"]]
        return TrainedModel(
            method=meta["method"],
            models=[str(m) for m in meta["models"]],
            class_names=[str(c) for c in meta["class_names"]],
            feature_dims=[int(d) for d in meta["feature_dims"]],
            energy=float(meta["energy"]),
            unit_norm=bool(meta["unit_norm"]),
            center=bool(meta["center"]),
            gallery=gallery,
            stage1=basis_from("stage1"),
            stage2=basis_from("stage2"),
            mda_report=report,
            spectra=spectra,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise FormatError(f"{path}: metadata is missing required fields") from exc
