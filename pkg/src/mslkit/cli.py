"""Batch command line: synth, train, eval, inspect.

Exit codes: 0 success, 1 data or numeric failure, 2 flag misuse.  Every
subcommand accepts ``--config FILE`` with ``key=value`` lines (keys are the
long flag names); explicit flags override config values.  The environment
variable MSLKIT_THREADS caps numba and BLAS thread pools, and
MSLKIT_DISABLE_NUMBA=1 forces the numpy eigensolver path.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ._kernels import backend_name
from .classify import Gallery, evaluate, render_report
from .dataio import (
    SyntheticSpec,
    TrainedModel,
    assemble,
    load_model,
    save_model,
    synth,
)
from .errors import IngestionError, MslError
from .msl import (
    LabeledSamples,
    MdaConfig,
    hosvd_fit,
    howsvd_fit,
    lda_fit,
    mda_fit,
    mode_spectra,
    project_all,
)

_METHOD_CHOICES = ("howsvd-mda", "hosvd-mda", "lda", "raw")

# Kept alive so the BLAS thread cap is not rolled back by garbage collection.
_THREAD_LIMITER = None


def _apply_thread_cap(parser: argparse.ArgumentParser) -> None:
    global _THREAD_LIMITER
    raw = os.environ.get("MSLKIT_THREADS")
    if not raw:
        return
    try:
        cap = int(raw)
    except ValueError:
        parser.error(f"MSLKIT_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        parser.error(f"MSLKIT_THREADS must be >= 1, got {cap}")
    try:
        import numba

        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
    try:
        import threadpoolctl

        _THREAD_LIMITER = threadpoolctl.threadpool_limits(limits=cap)
    except ImportError:
        pass


def _load_config(path: str, parser: argparse.ArgumentParser) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        parser.error(f"cannot read config {path}: {exc}")
    values: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"{path}: line {i} is not key=value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def _install_config_defaults(
    parser: argparse.ArgumentParser,
    subparsers: dict[str, argparse.ArgumentParser],
    argv: list[str],
) -> None:
    """Pre-scan argv for --config and install its values as defaults."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                parser.error("--config needs a file path")
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    sub = subparsers.get(command or "")
    if sub is None:
        parser.error("--config requires a subcommand")
    actions = {
        a.dest: a
        for a in sub._actions
        if a.option_strings and a.dest not in ("help", "config")
    }
    defaults = {}
    for key, value in _load_config(path, parser).items():
        action = actions.get(key)
        if action is None:
            parser.error(f"unknown config key '{key}' for command '{command}'")
        if action.nargs == 0:  # store_true flags
            low = value.lower()
            if low in _TRUE_WORDS:
                defaults[key] = True
            elif low in _FALSE_WORDS:
                defaults[key] = False
            else:
                parser.error(f"config key '{key}' expects a boolean, got {value!r}")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except ValueError:
                parser.error(f"config key '{key}': invalid value {value!r}")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)


def _fmt_dims(dims) -> str:
    return "x".join(str(int(d)) for d in dims)


def _parse_models(raw: str | None) -> list[str] | None:
    if not raw:
        return None
    models = [m.strip() for m in raw.split(",") if m.strip()]
    return models or None


def _parse_mda_dims(raw: str | None, parser) -> list[int] | None:
    if not raw:
        return None
    try:
        dims = [int(p) for p in raw.split(",")]
    except ValueError:
        parser.error(f"--mda-dims expects comma-separated integers, got {raw!r}")
    if any(d < 1 for d in dims):
        parser.error(f"--mda-dims entries must be >= 1, got {raw!r}")
    return dims


def cmd_synth(args, parser) -> int:
    if args.classes < 1:
        parser.error(f"--classes must be >= 1, got {args.classes}")
    if args.per_class < 2:
        parser.error(f"--per-class must be >= 2, got {args.per_class}")
    if args.dim < 1:
        parser.error(f"--dim must be >= 1, got {args.dim}")
    if args.models < 1:
        parser.error(f"--models must be >= 1, got {args.models}")
    if args.delta < 0 or args.sigma < 0:
        parser.error("--delta and --sigma must be >= 0")
    if args.seed < 0:
        parser.error(f"--seed must be >= 0, got {args.seed}")
    spec = SyntheticSpec(
        n_classes=args.classes,
        per_class=args.per_class,
        dim=args.dim,
        n_models=args.models,
        delta=args.delta,
        sigma=args.sigma,
        seed=args.seed,
    )
    train, test, train_csv, test_csv = synth(spec, args.out)
    print(
        f"synth: classes={spec.n_classes} per_class={spec.per_class} "
        f"dim={spec.dim} models={spec.n_models} delta={spec.delta} "
        f"sigma={spec.sigma} seed={spec.seed}"
    )
    print(
        f"wrote {train.n} train / {test.n} test samples; manifests "
        f"{train_csv} and {test_csv}"
    )
    return 0


def cmd_train(args, parser) -> int:
    if not (0.0 < args.energy <= 1.0):
        parser.error(f"--energy must be in (0, 1], got {args.energy}")
    if args.itr_max < 1:
        parser.error(f"--itr-max must be >= 1, got {args.itr_max}")
    if args.epsilon <= 0.0:
        parser.error(f"--epsilon must be > 0, got {args.epsilon}")
    if args.gamma < 0.0:
        parser.error(f"--gamma must be >= 0, got {args.gamma}")
    mda_dims = _parse_mda_dims(args.mda_dims, parser)
    if mda_dims is not None and args.method not in ("howsvd-mda", "hosvd-mda"):
        parser.error(f"--mda-dims does not apply to method {args.method}")
    models = _parse_models(args.models)

    samples, info = assemble(args.manifest, models, args.unit_norm)
    stage1 = stage2 = None
    report = None
    spectra = None
    if args.method in ("howsvd-mda", "hosvd-mda"):
        sp = mode_spectra(samples, args.center)
        fit = howsvd_fit if args.method == "howsvd-mda" else hosvd_fit
        stage1 = fit(samples, args.energy, args.center, spectra=sp)
        spectra = [e.values.copy() for e in sp]
        cfg = MdaConfig(
            output_dims=mda_dims,
            itr_max=args.itr_max,
            epsilon=args.epsilon,
            gamma=args.gamma,
        )
        projected = project_all(samples, stage1)
        stage2, report = mda_fit(projected, cfg)
        gallery = Gallery.from_samples(project_all(projected, stage2))
    elif args.method == "lda":
        flat = LabeledSamples(
            [s.ravel() for s in samples.samples],
            samples.labels,
            samples.class_names,
        )
        stage2 = lda_fit(flat, gamma=args.gamma)
        gallery = Gallery.from_samples(project_all(flat, stage2))
    else:  # raw
        gallery = Gallery.from_samples(samples)
    model = TrainedModel(
        method=args.method,
        models=info.models,
        class_names=samples.class_names,
        feature_dims=list(samples.shape),
        energy=args.energy,
        unit_norm=args.unit_norm,
        center=args.center,
        gallery=gallery,
        stage1=stage1,
        stage2=stage2,
        mda_report=report,
        spectra=spectra,
    )
    save_model(args.out, model)
    parts = [
        f"method={args.method}",
        f"train_samples={samples.n}",
        f"classes={len(samples.class_names)}",
        f"input_dims={_fmt_dims(samples.shape)}",
    ]
    if stage1 is not None:
        parts.append(f"stage1_dims={_fmt_dims(stage1.output_dims)}")
    if stage2 is not None:
        parts.append(f"stage2_dims={_fmt_dims(stage2.output_dims)}")
    if report is not None:
        parts.append(f"iterations={report.iterations}")
        parts.append(f"converged={'yes' if report.converged else 'no'}")
    if info.padded_models:
        parts.append(f"padded={','.join(info.padded_models)}")
    parts.append(f"gallery={gallery.vectors.shape[0]}x{gallery.vectors.shape[1]}")
    print(" ".join(parts))
    print(f"saved model to {args.out}")
    return 0


def cmd_eval(args, parser) -> int:
    model = load_model(args.model)
    samples, _ = assemble(args.manifest, model.models, model.unit_norm)
    name_to_label = {n: i + 1 for i, n in enumerate(model.class_names)}
    for name in samples.class_names:
        if name not in name_to_label:
            raise IngestionError(
                f"class '{name}' is not part of the trained model "
                f"(knows: {', '.join(model.class_names)})"
            )
    labels = np.array(
        [name_to_label[samples.class_names[l - 1]] for l in samples.labels]
    )
    probes = np.stack([model.project_sample(s) for s in samples.samples])
    rep = evaluate(probes, labels, model.gallery)
    text = render_report(rep)
    with open(args.report, "wb") as fh:
        fh.write(text.encode("utf-8"))
    print(f"accuracy: {rep.accuracy:.6f}")
    print(f"micro_auc: {rep.micro_auc:.6f}")
    print(f"report written to {args.report}")
    return 0


def cmd_inspect(args, parser) -> int:
    model = load_model(args.model)
    lines = [
        f"method: {model.method}",
        f"models: {','.join(model.models)}",
        f"classes: {len(model.class_names)} ({','.join(model.class_names)})",
        f"feature_dims: {_fmt_dims(model.feature_dims)}",
        f"energy: {model.energy:.6f}",
        f"unit_norm: {str(model.unit_norm).lower()}",
        f"center: {str(model.center).lower()}",
        f"backend: {backend_name()}",
    ]
    for key, basis in (("stage1", model.stage1), ("stage2", model.stage2)):
        if basis is not None:
            lines.append(
                f"{key}: {basis.stage} {_fmt_dims(basis.input_dims)} -> "
                f"{_fmt_dims(basis.output_dims)}"
            )
    if model.mda_report is not None:
        r = model.mda_report
        lines.append(f"iterations: {r.iterations}")
        lines.append(f"converged: {str(r.converged).lower()}")
        if r.final_deltas is not None:
            lines.append(
                "final_deltas: " + " ".join(f"{d:.3e}" for d in r.final_deltas)
            )
    if model.spectra is not None:
        for k, values in enumerate(model.spectra):
            lines.append(
                f"spectrum mode {k}: n={values.shape[0]} "
                f"top={values[0]:.6e} "
                f"kept={model.stage1.output_dims[k] if model.stage1 else '-'}"
            )
    g = model.gallery
    lines.append(f"gallery: {g.vectors.shape[0]}x{g.vectors.shape[1]}")
    print("\n".join(lines))
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="mslkit",
        description="Multilinear subspace learning over per-model feature "
        "vectors: synthesize datasets, train projection models, evaluate "
        "with cosine 1-NN matching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--classes", type=int, default=6)
    p_synth.add_argument("--per-class", type=int, default=100)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--models", type=int, default=3)
    p_synth.add_argument("--delta", type=float, default=5.0)
    p_synth.add_argument("--sigma", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--config", help="key=value defaults file")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="fit a projection model")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--out", required=True, help="model file to write")
    p_train.add_argument(
        "--method", choices=_METHOD_CHOICES, default="howsvd-mda"
    )
    p_train.add_argument(
        "--models", help="comma-separated model columns (default: all, sorted)"
    )
    p_train.add_argument("--energy", type=float, default=0.96)
    p_train.add_argument(
        "--mda-dims", help="comma-separated per-mode output dims (default: auto)"
    )
    p_train.add_argument("--itr-max", type=int, default=5)
    p_train.add_argument("--epsilon", type=float, default=1e-6)
    p_train.add_argument("--gamma", type=float, default=1e-6)
    p_train.add_argument("--center", action="store_true")
    p_train.add_argument("--unit-norm", action="store_true")
    p_train.add_argument("--config", help="key=value defaults file")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a model on a manifest")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--report", required=True, help="report file to write")
    p_eval.add_argument("--config", help="key=value defaults file")
    p_eval.set_defaults(func=cmd_eval)

    p_inspect = sub.add_parser("inspect", help="summarize a model file")
    p_inspect.add_argument("--model", required=True)
    p_inspect.add_argument("--config", help="key=value defaults file")
    p_inspect.set_defaults(func=cmd_inspect)

    return parser, {
        "synth": p_synth,
        "train": p_train,
        "eval": p_eval,
        "inspect": p_inspect,
    }


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    _install_config_defaults(parser, subparsers, argv)
    args = parser.parse_args(argv)
    _apply_thread_cap(parser)
    try:
        return args.func(args, parser)
    except (MslError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
