"""Command-line interface: feature extraction, warping, verification and
the stability/retrieval experiments.

Every output file starts with a metadata block (tool version plus the
full run configuration) so that runs are reproducible; re-running with
an identical configuration produces byte-identical files.  All file
writes are atomic (write to a temporary sibling, then rename).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .diffops import DiffConfig
from .invariants import AMI_FEATURES, DEFAULT_FEATURES, InvariantId, feature_vector
from .moments import MomentTable, ZeroMassError, geometric_moment
from .oracle import TupleBudgetError, verify_expansion, verify_zero_core
from .raster import (
    AffineParams,
    RasterError,
    SyntheticSpec,
    TABLE4_TRANSFORMS,
    generate_synthetic,
    load_image,
    save_pgm,
    warp_affine,
)
from .retrieval import (
    BENCHMARK_CONFIG,
    make_benchmark_dataset,
    run_retrieval,
    run_stability,
    stability_images,
)

#: Environment variable naming a default retrieval dataset root.
DATASET_ROOT_ENV = "AWMI_DATASET_ROOT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VERIFY = 3

_FEATURE_SETS = {
    "awmi": DEFAULT_FEATURES,
    "ami": AMI_FEATURES,
    "both": DEFAULT_FEATURES + AMI_FEATURES,
}

_ZERO_CORE_NAMES = ("AMI1", "AMI3", "AMI6")


@dataclass(frozen=True)
class RunConfig:
    """Full, serializable description of one CLI invocation."""

    subcommand: str
    inputs: tuple[str, ...]
    sigma: float
    kernel_size: int
    boundary: str
    features: str
    seed: int
    output_dir: str | None
    output_format: str
    extras: tuple[tuple[str, str], ...] = ()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=list)

    def diff_config(self) -> DiffConfig:
        return DiffConfig(sigma=self.sigma, kernel_size=self.kernel_size,
                          boundary=self.boundary)


def _fmt(value) -> str:
    """Shortest round-trip text for a number (NaN spelled ``nan``)."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _metadata(config: RunConfig) -> str:
    return f"# awmi {__version__}\n# config {config.to_json()}\n"


def _emit(text: str, config: RunConfig, filename: str) -> None:
    """Write to <output-dir>/<filename>, or stdout when no dir is set."""
    payload = _metadata(config) + text
    if config.output_dir is None:
        sys.stdout.write(payload)
        return
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / filename, payload)


def _csv(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _parse_transform(text: str) -> AffineParams:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 6:
        raise ValueError(f"transform needs 6 numbers a11,a12,a21,a22,t1,t2, got {text!r}")
    return AffineParams(*(float(p) for p in parts))


def _resolve_transforms(args) -> tuple[AffineParams, ...]:
    customs = tuple(_parse_transform(t) for t in (args.transform or []))
    if customs:
        return customs
    if args.transforms != "table4":
        raise ValueError(f"unknown transform set {args.transforms!r}")
    return TABLE4_TRANSFORMS


def _make_config(args, subcommand: str, inputs=(), extras=()) -> RunConfig:
    return RunConfig(
        subcommand=subcommand,
        inputs=tuple(str(i) for i in inputs),
        sigma=args.sigma,
        kernel_size=args.kernel_size,
        boundary=args.boundary,
        features=getattr(args, "features", "awmi"),
        seed=getattr(args, "seed", 0),
        output_dir=args.output_dir,
        output_format=getattr(args, "format", "csv"),
        extras=tuple((str(k), str(v)) for k, v in extras),
    )


def _feature_rows(names_rasters, ids, config: RunConfig, jobs: int | None):
    diff = config.diff_config()
    vectors = [(name, feature_vector(r, ids, diff)) for name, r in names_rasters]
    header = ["image"] + [i.value for i in ids]
    rows = [[name] + [float(v) for v in vec.values] for name, vec in vectors]
    return header, rows


# ---------------------------------------------------------------------------
# subcommands


def _cmd_features(args) -> int:
    ids = _FEATURE_SETS[args.features]
    config = _make_config(args, "features", inputs=args.inputs)
    images = [(str(p), load_image(p)) for p in args.inputs]
    header, rows = _feature_rows(images, ids, config, args.jobs)
    if config.output_format == "json":
        body = json.dumps([dict(zip(header, row)) for row in rows],
                          sort_keys=True, indent=2, default=_fmt) + "\n"
        _emit(body, config, "features.json")
    else:
        _emit(_csv(header, rows), config, "features.csv")
    return EXIT_OK


def _cmd_warp(args) -> int:
    transform = _parse_transform(args.params)
    config = _make_config(args, "warp", inputs=[args.input],
                          extras=[("params", args.params), ("output", args.output)])
    src = load_image(args.input)
    out = warp_affine(src, transform, out_width=args.width, out_height=args.height)
    dest = Path(args.output)
    dest.parent.mkdir(parents=True, exist_ok=True)
    save_pgm(out, dest)
    return EXIT_OK


def _cmd_moments(args) -> int:
    config = _make_config(args, "moments", inputs=[args.input],
                          extras=[("max_order", args.max_order)])
    raster = load_image(args.input)
    table = MomentTable(raster)
    rows = []
    for order in range(args.max_order + 1):
        for p in range(order, -1, -1):
            q = order - p
            rows.append([p, q, geometric_moment(raster, p, q), table.u(p, q)])
    _emit(_csv(["p", "q", "m_pq", "u_pq"], rows), config, "moments.csv")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.invariant == "all":
        closed = [i.value for i in InvariantId if i != InvariantId.AWMI2]
        zero = list(_ZERO_CORE_NAMES)
    elif args.invariant in _ZERO_CORE_NAMES:
        closed, zero = [], [args.invariant]
    else:
        closed, zero = [args.invariant], []

    config = _make_config(args, "verify",
                          extras=[("invariant", args.invariant),
                                  ("trials", args.trials)])
    rows = []
    all_passed = True
    for name in closed:
        report = verify_expansion(name, trials=args.trials, seed=args.seed)
        rows.append([report.invariant, report.trials, report.seed,
                     report.tolerance, report.max_rel_deviation,
                     "pass" if report.passed else "FAIL"])
        all_passed &= report.passed
    for name in zero:
        report = verify_zero_core(name, trials=args.trials, seed=args.seed)
        rows.append([report.invariant, report.trials, report.seed,
                     report.tolerance, report.max_rel_deviation,
                     "pass" if report.passed else "FAIL"])
        all_passed &= report.passed
    _emit(_csv(["invariant", "trials", "seed", "tolerance",
                "max_rel_deviation", "status"], rows), config, "verify.csv")
    return EXIT_OK if all_passed else EXIT_VERIFY


def _cmd_stability(args) -> int:
    transforms = _resolve_transforms(args)
    ids = _FEATURE_SETS[args.features]
    if args.input:
        images = {str(p): load_image(p) for p in args.input}
    else:
        images = stability_images()
    config = _make_config(args, "stability", inputs=args.input or [],
                          extras=[("transforms", args.transforms),
                                  ("n_transforms", len(transforms))])
    report = run_stability(images, transforms, config.diff_config(), ids,
                           jobs=args.jobs)
    header = (["image", "invariant", "identity"]
              + [f"t{k + 1}" for k in range(len(transforms))] + ["error_pct"])
    rows = [[r.image, r.invariant.value, *r.values, r.error_pct] for r in report.rows]
    body = _csv(header, rows)
    if report.warnings:
        body += "".join(f"# warning: {w}\n" for w in report.warnings)
    _emit(body, config, "stability.csv")
    return EXIT_OK


def _cmd_retrieve(args) -> int:
    dataset_root = args.dataset or os.environ.get(DATASET_ROOT_ENV)
    if dataset_root:
        dataset = dataset_root
        extras = [("dataset", dataset_root)]
        default_diff = DiffConfig()
    else:
        dataset = make_benchmark_dataset(seed=args.seed)
        extras = [("dataset", "builtin"), ("classes", 20)]
        default_diff = BENCHMARK_CONFIG
    if args.sigma is None:
        args.sigma = default_diff.sigma
    if args.kernel_size is None:
        args.kernel_size = default_diff.kernel_size

    config = _make_config(args, "retrieve", extras=extras)
    methods = ["awmi", "ami"] if args.features == "both" else [args.features]
    rows = []
    for method in methods:
        result = run_retrieval(dataset, config.diff_config(),
                               ids=_FEATURE_SETS[method],
                               use_signed_log=args.signed_log, jobs=args.jobs)
        rows += [[rc, pr, method]
                 for rc, pr in zip(result.curve.recalls, result.curve.precisions)]
        if result.skipped:
            print(f"warning: skipped {result.skipped} unreadable image(s)",
                  file=sys.stderr)
    _emit(_csv(["recall", "precision", "method"], rows), config, "pr_curve.csv")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(kind=args.kind, width=args.width, height=args.height,
                         seed=args.seed, blobs=args.blobs)
    raster = generate_synthetic(spec)
    dest = Path(args.output)
    dest.parent.mkdir(parents=True, exist_ok=True)
    save_pgm(raster, dest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_diff_options(p, sigma_default=3.0, kernel_default=9):
    p.add_argument("--sigma", type=float, default=sigma_default,
                   help="Gaussian smoothing scale in pixels")
    p.add_argument("--kernel-size", type=int, default=kernel_default,
                   help="odd derivative-kernel side length")
    p.add_argument("--boundary", choices=["reflect", "zero"], default="reflect")


def _add_output_options(p):
    p.add_argument("--output-dir", default=None,
                   help="write outputs here instead of stdout")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--jobs", type=int, default=None,
                   help="max parallel workers for per-image feature extraction")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="awmi",
                     description="Affine weighted moment invariants of "
                                 "grayscale images: features, verification "
                                 "and experiments.")
    parser.add_argument("--version", action="version", version=f"awmi {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("features", help="invariant feature vectors of images")
    p.add_argument("inputs", nargs="+", metavar="IMAGE")
    p.add_argument("--features", choices=sorted(_FEATURE_SETS), default="awmi")
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("warp", help="affinely warp an image")
    p.add_argument("input", metavar="IMAGE")
    p.add_argument("--params", required=True,
                   help="six numbers a11,a12,a21,a22,t1,t2")
    p.add_argument("--output", required=True, help="output PGM path")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("moments", help="geometric and central moments")
    p.add_argument("input", metavar="IMAGE")
    p.add_argument("--max-order", type=int, default=3)
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("verify", help="brute-force oracle verification")
    choices = (["all"] + [i.value for i in InvariantId if i != InvariantId.AWMI2]
               + list(_ZERO_CORE_NAMES))
    p.add_argument("--invariant", choices=choices, default="all")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("stability", help="invariant spread across affine warps")
    p.add_argument("--input", nargs="*", metavar="IMAGE",
                   help="base images (default: built-in synthetic set)")
    p.add_argument("--transforms", default="table4",
                   help="named transform set (built-in: table4)")
    p.add_argument("--transform", action="append",
                   help="custom transform as six numbers; repeatable")
    p.add_argument("--features", choices=sorted(_FEATURE_SETS), default="both")
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("retrieve", help="ranked retrieval precision/recall")
    p.add_argument("--dataset", default=None,
                   help=f"dataset root (default: ${DATASET_ROOT_ENV} or the "
                        "built-in synthetic set)")
    p.add_argument("--features", choices=sorted(_FEATURE_SETS), default="both")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the built-in dataset")
    p.add_argument("--signed-log", action="store_true",
                   help="signed-log rescale feature vectors before ranking")
    _add_diff_options(p, sigma_default=None, kernel_default=None)
    _add_output_options(p)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("synth", help="generate a synthetic test image")
    p.add_argument("--kind", choices=["bumps", "blobs", "ramp", "shape"],
                   default="bumps")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blobs", type=int, default=3)
    p.add_argument("--output", required=True, help="output PGM path")
    _add_diff_options(p)
    _add_output_options(p)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RasterError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ZeroMassError, TupleBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
