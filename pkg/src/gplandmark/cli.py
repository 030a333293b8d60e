"""Command line front end.

    gplandmark run --input mesh.off --num-landmarks 150 --out outdir/
    gplandmark analyze --trace outdir/landmarks.json --bound-check 5,10,20 --fit 20:100

On failure a single line ``gplandmark: error code=<CODE>: <message>`` goes
to stderr and the process exits nonzero.
"""

import argparse
import csv
import dataclasses
import datetime
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    baseline_design,
    candidate_designs,
    convergence_fit,
    design_report,
    oracle_bound_check,
    write_report,
)
from .errors import ConfigError, GPLandmarkError, ParseError, ValidationError
from .geometry import curvature_weight, discrete_curvatures, pointcloud_importance, uniform_weights, voronoi_areas
from .geometry import WeightField
from .kernel import KINDS, REWEIGHTED, build_kernel, default_bandwidth, psd_floor
from .landmarking import TIE_RULES, LandmarkTrace, gp_landmark
from .mesh_io import CLOUD_FORMATS, MESH_FORMATS, load_mesh, load_point_cloud
from .plotting import write_convergence_svg

logger = logging.getLogger("gplandmark")

EXIT_CODES = {
    "CONFIG_ERROR": 2,
    "PARSE_ERROR": 3,
    "VALIDATION_ERROR": 3,
    "IO_ERROR": 5,
}
EMIT_FLAGS = ("trace", "mspe_field", "plot", "report")
WEIGHT_SOURCES = ("curvature", "uniform", "file")


@dataclass
class RunConfig:
    input: str
    format: str = None
    kernel: str = REWEIGHTED
    epsilon: object = "auto"
    lam: float = 0.5
    rho: float = 1.0
    num_landmarks: int = 150
    tolerance: float = 0.0
    tie: str = "lowest"
    weights: str = "curvature"
    weights_file: str = None
    knn: int = 10
    jitter: str = "none"
    seed: int = 0
    out: str = "."
    emit: list = field(default_factory=lambda: ["trace"])

    def validate(self):
        if self.format is not None and self.format not in MESH_FORMATS + CLOUD_FORMATS:
            raise ConfigError(f"unknown input format {self.format!r}")
        if self.kernel not in KINDS:
            raise ConfigError(f"kernel must be one of {KINDS}")
        if self.epsilon != "auto":
            try:
                eps = float(self.epsilon)
            except (TypeError, ValueError):
                raise ConfigError(f"epsilon must be 'auto' or a positive number, got {self.epsilon!r}") from None
            if not np.isfinite(eps) or eps <= 0:
                raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.num_landmarks < 1:
            raise ConfigError(f"number of landmarks must be at least 1, got {self.num_landmarks}")
        if not self.tolerance >= 0:
            raise ConfigError(f"tolerance must be nonnegative, got {self.tolerance}")
        if self.tie not in TIE_RULES:
            raise ConfigError(f"tie rule must be one of {TIE_RULES}")
        if self.weights not in WEIGHT_SOURCES:
            raise ConfigError(f"weight source must be one of {WEIGHT_SOURCES}")
        if self.weights == "file" and not self.weights_file:
            raise ConfigError("weight source 'file' needs --weights-file")
        if self.jitter not in ("none", "relative"):
            raise ConfigError("jitter policy must be 'none' or 'relative'")
        bad = set(self.emit) - set(EMIT_FLAGS)
        if bad:
            raise ConfigError(f"unknown emit flags {sorted(bad)}; choose from {EMIT_FLAGS}")
        return self


def _input_format(cfg):
    if cfg.format:
        return cfg.format
    ext = os.path.splitext(cfg.input)[1].lower().lstrip(".")
    if ext not in MESH_FORMATS + CLOUD_FORMATS:
        raise ConfigError(f"cannot infer input format from {cfg.input!r}; pass --format")
    return ext


def _read_weight_file(path, n):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                rows.append([float(t) for t in s.replace(",", " ").split()])
            except ValueError:
                raise ParseError("non-numeric weight", lineno) from None
    if len(rows) != n or len({len(r) for r in rows}) != 1 or len(rows[0]) not in (1, 2):
        raise ValidationError(f"weight file must hold {n} rows of 'w' or 'w,nu'")
    return np.array(rows)


def prepare(cfg):
    """Load the input and assemble the kernel. Returns (points, kernel, eps, weight field)."""
    fmt = _input_format(cfg)
    if fmt in MESH_FORMATS:
        mesh = load_mesh(cfg.input, fmt)
        points = mesh.vertices
    else:
        mesh = None
        points = load_point_cloud(cfg.input, fmt).points
    n = len(points)
    if cfg.num_landmarks > n:
        raise ConfigError(f"requested {cfg.num_landmarks} landmarks but the input has only {n} points")
    eps = default_bandwidth(points) if cfg.epsilon == "auto" else float(cfg.epsilon)
    logger.info("bandwidth epsilon = %r", eps)

    wf = None
    if cfg.kernel == REWEIGHTED:
        if cfg.weights == "curvature":
            if mesh is not None:
                curv, area = discrete_curvatures(mesh, return_areas=True)
                wf = curvature_weight(curv, area, cfg.lam, cfg.rho)
            else:
                wf = pointcloud_importance(points, cfg.knn)
        elif cfg.weights == "uniform":
            wf = uniform_weights(n, voronoi_areas(mesh) if mesh is not None else None)
        else:
            table = _read_weight_file(cfg.weights_file, n)
            if table.shape[1] == 2:
                area = table[:, 1]
            else:
                area = voronoi_areas(mesh) if mesh is not None else np.full(n, 1.0 / n)
            wf = WeightField(table[:, 0], area)
    K = psd_floor(build_kernel(points, eps, cfg.kernel, wf), cfg.jitter)
    return points, K, eps, wf


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _trace_params(cfg, eps):
    return {"epsilon": eps, "lambda": cfg.lam, "rho": cfg.rho, "kernel_kind": cfg.kernel,
            "tie_rule": cfg.tie, "seed": cfg.seed, "weights": cfg.weights, "jitter": cfg.jitter}


def run_landmark(cfg):
    cfg.validate()
    points, K, eps, _ = prepare(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    trace = gp_landmark(K, cfg.num_landmarks, cfg.tolerance, cfg.tie, cfg.seed, _trace_params(cfg, eps))
    trace.write_json(os.path.join(cfg.out, "landmarks.json"))
    trace.write_csv(os.path.join(cfg.out, "landmarks.csv"))
    if "mspe_field" in cfg.emit:
        with open(os.path.join(cfg.out, "mspe_field.csv"), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["vertex_index", "mspe"])
            for i, s in enumerate(trace.final_mspe):
                out.writerow([i, repr(float(s))])
    if "plot" in cfg.emit:
        write_convergence_svg(os.path.join(cfg.out, "convergence.svg"), trace.sigma_history)
    if "report" in cfg.emit:
        write_report(cfg.out, [design_report(K, points, trace.selected, "greedy")])
    manifest = {
        "config": dataclasses.asdict(cfg),
        "resolved": {"epsilon": eps, "input_path": os.path.abspath(cfg.input),
                     "input_format": _input_format(cfg), "n_points": len(points),
                     "input_sha256": _sha256(cfg.input), "max_diag": K.max_diag,
                     "n_selected": len(trace), "stop_reason": trace.stop_reason},
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(cfg.out, "run_manifest.json"), "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return trace


def _parse_int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None


def _parse_range(text):
    try:
        a, b = (int(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"expected a range 'n_min:n_max', got {text!r}") from None
    if not 1 <= a < b:
        raise ConfigError(f"fit range needs 1 <= n_min < n_max, got {text!r}")
    return a, b


def run_analyze(trace_path, baselines=200, bound_check=(), fit=None, fit_scale="loglog",
                seed=0, out=None, manifest_path=None):
    bound_check = list(bound_check)
    if bound_check and baselines < 1:
        raise ConfigError("bound check needs at least one baseline design (--baselines >= 1)")
    if any(m < 1 for m in bound_check):
        raise ConfigError("bound check sizes must be positive")
    trace_dir = os.path.dirname(os.path.abspath(trace_path))
    manifest_path = manifest_path or os.path.join(trace_dir, "run_manifest.json")
    try:
        saved = LandmarkTrace.read_json(trace_path)
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read trace or manifest: {exc}") from None
    cfg = RunConfig(**manifest["config"])
    cfg.input = manifest["resolved"]["input_path"]
    cfg.epsilon = manifest["resolved"]["epsilon"]
    out = out or trace_dir
    os.makedirs(out, exist_ok=True)

    needed = max([len(saved)] + [2 * m for m in bound_check] + ([fit[1]] if fit else []))
    cfg.num_landmarks = needed
    cfg.validate()
    points, K, eps, _ = prepare(cfg)
    trace = gp_landmark(K, needed, None, cfg.tie, cfg.seed, _trace_params(cfg, eps))
    if trace.selected[: len(saved)] != list(saved.selected):
        raise ValidationError("recomputed greedy design does not reproduce the saved trace")

    designs, checks, fits = [], [], []
    for m in bound_check:
        if len(trace) < 2 * m:
            raise ValidationError(f"greedy loop stopped after {len(trace)} landmarks; m={m} needs {2 * m}")
        pool = candidate_designs(points, m, baselines, seed)
        checks.append(oracle_bound_check(K, trace, pool))
        designs.append(design_report(K, points, trace.selected[:m], "greedy"))
        designs.append(design_report(K, points, baseline_design(points, "fps", m), "fps"))
        randoms = [design_report(K, points, d, "random", seed) for d in pool[:-1]]
        designs.append(min(randoms, key=lambda r: r.max_mspe))
    if fit:
        fits.append(convergence_fit(trace, fit[0], fit[1], fit_scale))
    designs.append(design_report(K, points, trace.selected, "greedy"))
    doc = write_report(out, designs, checks, fits,
                       extra={"trace": trace.to_dict(), "baselines": baselines, "seed": seed})
    write_convergence_svg(os.path.join(out, "convergence.svg"), trace.sigma_history, fits[0] if fits else None)
    return doc


def _build_parser():
    p = argparse.ArgumentParser(prog="gplandmark", description="Gaussian-process landmarking on surfaces.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="select landmarks greedily")
    r.add_argument("--input", required=True)
    r.add_argument("--format", choices=MESH_FORMATS + CLOUD_FORMATS)
    r.add_argument("--kernel", choices=KINDS, default=REWEIGHTED)
    r.add_argument("--epsilon", default="auto")
    r.add_argument("--lambda", dest="lam", type=float, default=0.5)
    r.add_argument("--rho", type=float, default=1.0)
    r.add_argument("--num-landmarks", type=int, default=150)
    r.add_argument("--tolerance", type=float, default=0.0)
    r.add_argument("--tie", choices=TIE_RULES, default="lowest")
    r.add_argument("--weights", choices=WEIGHT_SOURCES, default="curvature")
    r.add_argument("--weights-file")
    r.add_argument("--knn", type=int, default=10, help="neighbors for point-cloud importance")
    r.add_argument("--jitter", choices=("none", "relative"), default="none")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=".")
    r.add_argument("--emit", default="trace", help=f"comma separated subset of {','.join(EMIT_FLAGS)}")

    a = sub.add_parser("analyze", help="baseline comparisons, bound checks and convergence fits")
    a.add_argument("--trace", required=True)
    a.add_argument("--manifest")
    a.add_argument("--baselines", type=int, default=200)
    a.add_argument("--bound-check", default="")
    a.add_argument("--fit")
    a.add_argument("--fit-scale", choices=("loglog", "semilog"), default="loglog")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    return p


def _limit_threads():
    limit = os.environ.get("GPLANDMARK_THREADS")
    if not limit:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(limit))


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    _limit_threads()
    try:
        if args.command == "run":
            cfg = RunConfig(
                input=args.input, format=args.format, kernel=args.kernel, epsilon=args.epsilon,
                lam=args.lam, rho=args.rho, num_landmarks=args.num_landmarks, tolerance=args.tolerance,
                tie=args.tie, weights=args.weights, weights_file=args.weights_file, knn=args.knn,
                jitter=args.jitter, seed=args.seed, out=args.out,
                emit=[e.strip() for e in args.emit.split(",") if e.strip()],
            )
            trace = run_landmark(cfg)
            print(f"selected {len(trace)} landmarks ({trace.stop_reason}); wrote {cfg.out}")
        else:
            doc = run_analyze(
                args.trace, args.baselines, _parse_int_list(args.bound_check),
                _parse_range(args.fit) if args.fit else None, args.fit_scale, args.seed,
                args.out, args.manifest,
            )
            for b in doc["bound_checks"]:
                print(f"bound m={b['m']}: lhs={b['lhs']:.6g} rhs={b['rhs']:.6g} {'pass' if b['pass'] else 'FAIL'}")
            for f in doc["fits"]:
                print(f"fit n={f['n_range']}: slope={f['slope']:.4f} R2={f['r_squared']:.4f}")
    except GPLandmarkError as exc:
        print(f"gplandmark: error code={exc.code}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.code, 4)
    except OSError as exc:
        print(f"gplandmark: error code=IO_ERROR: {exc}", file=sys.stderr)
        return EXIT_CODES["IO_ERROR"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
